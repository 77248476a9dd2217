#pragma once

#include "dedpo/rng.hpp"
#include "dedpo/types.hpp"

namespace dedpo {

// Architecture of the small conditional noise predictor.  Input is the noisy
// point, the normalized timestep t/T, and a learned embedding of the
// condition id.  Condition ids run 0..vocab-1; id vocab is a reserved null
// condition used for unconditional prediction.
struct DenoiserSpec {
  int data_dim = 2;
  int vocab = 4;
  int emb_dim = 4;
  int hidden = 64;

  int null_cond() const { return vocab; }
  int input_dim() const { return data_dim + 1 + emb_dim; }
  int param_count() const;

  bool operator==(const DenoiserSpec&) const = default;
};

// Two-hidden-layer tanh MLP with all parameters in one flat vector, so
// optimizers, serialization and finite differencing can treat the model as a
// point in R^p.  Flat layout: embeddings (one row per condition id, null
// last), then W1, b1, W2, b2, W3, b3, each column-major.
class ToyDenoiser {
 public:
  explicit ToyDenoiser(const DenoiserSpec& spec);

  // Glorot-uniform weights, N(0, 0.5) embeddings, zero biases.
  static ToyDenoiser random_init(const DenoiserSpec& spec, RngStream rng);

  const DenoiserSpec& spec() const { return spec_; }
  const Vec& params() const { return theta_; }
  Vec& params() { return theta_; }

  // Forward activations retained for the backward pass.
  struct Cache {
    Vec input;
    Vec a1;
    Vec a2;
    int cond = 0;
  };

  Vec predict(const Vec& x, double t_norm, int cond) const;
  Vec predict(const Vec& x, double t_norm, int cond, Cache& cache) const;
  Vec operator()(const Vec& x, double t_norm, int cond) const {
    return predict(x, t_norm, cond);
  }

  // Accumulates d(loss)/d(theta) into grad given d(loss)/d(output); grad must
  // be preallocated at param_count() and is added to, not overwritten.
  void accumulate_grad(const Cache& cache, const Vec& grad_out, Vec& grad) const;

 private:
  DenoiserSpec spec_;
  Vec theta_;
};

}  // namespace dedpo
