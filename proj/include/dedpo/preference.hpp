#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dedpo/denoiser.hpp"
#include "dedpo/rng.hpp"
#include "dedpo/schedule.hpp"

namespace dedpo {

class Annotator;

// A comparison between two candidate points under condition c.  z = 1 means
// x1 was preferred, z = 0 means x0; absent z marks an unlabeled pair.
struct PreferenceTriplet {
  std::int64_t id = 0;
  int c = 0;
  Vec x0;
  Vec x1;
  std::optional<int> z;

  bool labeled() const { return z.has_value(); }
};

// Validates dimensions, rejects exactly identical candidates and labels
// outside {0, 1}.
PreferenceTriplet make_triplet(std::int64_t id, int c, Vec x0, Vec x1,
                               std::optional<int> z = std::nullopt);

// One stochastic evaluation of a triplet: a shared timestep and one noise
// vector per side.
struct MarginDraw {
  int t = 0;
  Vec eps0;
  Vec eps1;
};

MarginDraw draw_margin(int data_dim, const NoiseSchedule& sched, RngStream& rng);

// Non-owning view of a triplet paired with its draw; the triplet must outlive
// the sample.
struct MarginSample {
  const PreferenceTriplet* y = nullptr;
  MarginDraw d;
};

// Binary cross entropy -b*log(a) - (1-b)*log(1-a).  The prediction a must lie
// strictly inside (0, 1); the target b is unrestricted, and the function is
// affine in it, which several identities below rely on.
double bce(double a, double b);

// Thrown when an objective, gradient or parameter vector stops being finite.
struct TrainingDiverged : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Preference margin between policy and reference noise-prediction errors on
// the two noised candidates.  Positive margins favor x1.  Predict signature:
// (const Vec& x, double t_norm, int cond) -> Vec.
template <class PolicyP, class RefP>
double dpo_margin(PolicyP&& policy, RefP&& ref, const MarginSample& s,
                  const NoiseSchedule& sched, double beta) {
  const PreferenceTriplet& y = *s.y;
  const double tn = static_cast<double>(s.d.t) / sched.T;
  const Vec x0t = forward_noise(y.x0, s.d.t, s.d.eps0, sched).x;
  const Vec x1t = forward_noise(y.x1, s.d.t, s.d.eps1, sched).x;
  const double e1p = (s.d.eps1 - policy(x1t, tn, y.c)).squaredNorm();
  const double e1r = (s.d.eps1 - ref(x1t, tn, y.c)).squaredNorm();
  const double e0p = (s.d.eps0 - policy(x0t, tn, y.c)).squaredNorm();
  const double e0r = (s.d.eps0 - ref(x0t, tn, y.c)).squaredNorm();
  return -beta * ((e1p - e1r) - (e0p - e0r));
}

double dpo_margin(const ToyDenoiser& policy, const ToyDenoiser& ref,
                  const MarginSample& s, const NoiseSchedule& sched,
                  double beta);

// Model win probability sigmoid(margin), clamped away from {0, 1} so it can
// enter logarithms.
double g_theta(const ToyDenoiser& policy, const ToyDenoiser& ref,
               const MarginSample& s, const NoiseSchedule& sched, double beta);

enum class EstimatorKind { FullLabelDPO, LabeledOnlyDPO, OutcomeRegression, DeDPO };

EstimatorKind parse_estimator(const std::string& name);
std::string estimator_name(EstimatorKind kind);

// Optional per-triplet correction weight for the debiased estimators; when
// absent the inverse labeling rate (n_l + n_u) / n_l is used.
using WeightFn = std::function<double(const PreferenceTriplet&)>;

// Pseudo-target ghat + ratio * (z - ghat) for labeled pairs, plain ghat for
// unlabeled ones.  ratio must be >= 1 (it is an inverse probability); the
// result may leave [0, 1] by design.
double combined_target(const std::optional<int>& z, double ghat, double ratio);

// How the stochastic draws are shared across the terms of a loss.  shared
// reuses one draw per triplet for every term in the evaluation (making the
// correction terms cancel exactly); independent gives each term group its own
// draws, which is the regime of the averaged estimator.
enum class DrawMode { shared, independent };

// The draw eval_loss_terms will use for (seed, lane, id); exposed so gating
// logic can inspect the exact draw an objective term is about to see.
MarginDraw margin_draw_for(std::uint64_t seed, std::uint32_t lane,
                           std::int64_t id, int dim,
                           const NoiseSchedule& sched);

// One weighted cross-entropy term of a batch objective.  Terms with the same
// triplet and draw lane reuse the same stochastic draw; in shared mode the
// lane is ignored and every term of a triplet shares one draw.
struct LossTerm {
  const PreferenceTriplet* y = nullptr;
  double target = 0.0;
  double weight = 0.0;
  std::uint32_t draw_lane = 0;
};

// Evaluates sum_i weight_i * bce(g_theta(y_i), target_i) with draws derived
// from (seed, draw lane, triplet id).  If grad is non-null it is resized and
// overwritten with the gradient with respect to the policy parameters.
double eval_loss_terms(const ToyDenoiser& policy, const ToyDenoiser& ref,
                       std::span<const LossTerm> terms, double beta,
                       const NoiseSchedule& sched, std::uint64_t seed,
                       DrawMode mode, Vec* grad = nullptr);

// Mean DPO cross entropy over a fully labeled batch; throws if any triplet is
// unlabeled.
double loss_full_dpo(const ToyDenoiser& policy, const ToyDenoiser& ref,
                     std::span<const PreferenceTriplet> batch, double beta,
                     const NoiseSchedule& sched, std::uint64_t seed,
                     Vec* grad = nullptr);

// Outcome regression: labeled mean of bce against labels plus unlabeled mean
// of bce against annotator scores.  Empty groups contribute zero.
double loss_or(const ToyDenoiser& policy, const ToyDenoiser& ref,
               std::span<const PreferenceTriplet> labeled,
               std::span<const PreferenceTriplet> unlabeled,
               const Annotator& annot, double beta, const NoiseSchedule& sched,
               std::uint64_t seed, Vec* grad = nullptr);

// Pooled variant: one mean over all pairs with labels where available and
// annotator scores elsewhere.  This is the form whose minimizer tracks the
// imputed preference distribution, and the form used inside training batches.
double loss_or_pooled(const ToyDenoiser& policy, const ToyDenoiser& ref,
                      std::span<const PreferenceTriplet> labeled,
                      std::span<const PreferenceTriplet> unlabeled,
                      const Annotator& annot, double beta,
                      const NoiseSchedule& sched, std::uint64_t seed,
                      Vec* grad = nullptr);

// Debiased objective, explicit three-term form: pooled mean against annotator
// scores plus a weighted labeled-set correction toward the true labels.
double loss_dedpo_3term(const ToyDenoiser& policy, const ToyDenoiser& ref,
                        std::span<const PreferenceTriplet> labeled,
                        std::span<const PreferenceTriplet> unlabeled,
                        const Annotator& annot, const WeightFn& weight,
                        double beta, const NoiseSchedule& sched,
                        std::uint64_t seed, DrawMode mode = DrawMode::shared,
                        Vec* grad = nullptr);

// Same objective folded into a single mean over combined targets; equal to
// the three-term form up to floating-point roundoff.
double loss_dedpo_combined(const ToyDenoiser& policy, const ToyDenoiser& ref,
                           std::span<const PreferenceTriplet> labeled,
                           std::span<const PreferenceTriplet> unlabeled,
                           const Annotator& annot, const WeightFn& weight,
                           double beta, const NoiseSchedule& sched,
                           std::uint64_t seed, DrawMode mode = DrawMode::shared,
                           Vec* grad = nullptr);

}  // namespace dedpo
