#pragma once

#include <span>
#include <utility>
#include <vector>

#include "dedpo/denoiser.hpp"
#include "dedpo/rng.hpp"
#include "dedpo/schedule.hpp"

namespace dedpo {

// One conditioned training point for the denoising objective.
struct Example {
  Vec x0;
  int c = 0;
};

// Mean squared noise-prediction error over the batch with timesteps drawn
// uniformly from {1..T} and fresh Gaussian noise per item.  Templated on the
// predictor so reference models with closed-form behavior can be plugged in.
// Predict signature: (const Vec& x, double t_norm, int cond) -> Vec.
template <class Predict>
double denoising_loss(Predict&& predict, std::span<const Example> batch,
                      const NoiseSchedule& sched, RngStream draws) {
  double total = 0.0;
  Vec eps;
  for (const Example& ex : batch) {
    const int t = 1 + static_cast<int>(draws.below(sched.T));
    eps.resize(ex.x0.size());
    for (Eigen::Index i = 0; i < eps.size(); ++i) eps[i] = draws.normal();
    const LatentSample ls = forward_noise(ex.x0, t, eps, sched);
    const Vec pred =
        predict(ls.x, static_cast<double>(t) / sched.T, ex.c);
    total += (pred - eps).squaredNorm();
  }
  return total / static_cast<double>(batch.size());
}

double denoising_loss(const ToyDenoiser& model, std::span<const Example> batch,
                      const NoiseSchedule& sched, RngStream draws);

// Same objective, accumulating the parameter gradient into grad (which is
// zeroed first).  Draws are identical to the loss-only path for equal streams.
double denoising_loss_grad(const ToyDenoiser& model,
                           std::span<const Example> batch,
                           const NoiseSchedule& sched, RngStream draws,
                           Vec& grad);

// Classifier-free guidance: unconditional prediction plus guidance times the
// conditional-unconditional gap.  guidance = 0 ignores the condition entirely;
// guidance = 1 is plain conditional prediction.
template <class Predict>
Vec cfg_predict(Predict&& predict, const Vec& x, double t_norm, int cond,
                int null_cond, double guidance) {
  if (guidance == 0.0) return predict(x, t_norm, null_cond);
  if (guidance == 1.0) return predict(x, t_norm, cond);
  Vec uncond = predict(x, t_norm, null_cond);
  Vec condp = predict(x, t_norm, cond);
  return uncond + guidance * (condp - uncond);
}

Vec cfg_predict(const ToyDenoiser& model, const Vec& x, double t_norm, int cond,
                double guidance);

// Deterministic reverse-process sampler.  Starts from pure noise and steps
// t = T..1 through the predicted clean point; at t = T the signal weight is
// zero, so the clean-point estimate is pinned at the origin rather than
// divided out.  Predict signature: (const Vec& x, double t_norm) -> Vec.
template <class Predict>
Vec ddim_sample_with(Predict&& predict, const NoiseSchedule& sched,
                     int data_dim, RngStream draws) {
  Vec x(data_dim);
  for (int i = 0; i < data_dim; ++i) x[i] = draws.normal();
  for (int t = sched.T; t >= 1; --t) {
    const Vec eps_hat = predict(x, static_cast<double>(t) / sched.T);
    Vec x0_hat;
    if (t == sched.T) {
      x0_hat = Vec::Zero(data_dim);
    } else {
      x0_hat = (x - sched.sigma[t] * eps_hat) / sched.alpha[t];
    }
    x = sched.alpha[t - 1] * x0_hat + sched.sigma[t - 1] * eps_hat;
  }
  return x;
}

Vec ddim_sample(const ToyDenoiser& model, int cond, const NoiseSchedule& sched,
                double guidance, RngStream draws);

}  // namespace dedpo
