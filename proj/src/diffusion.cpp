#include "dedpo/diffusion.hpp"

namespace dedpo {

double denoising_loss(const ToyDenoiser& model, std::span<const Example> batch,
                      const NoiseSchedule& sched, RngStream draws) {
  return denoising_loss(
      [&](const Vec& x, double t_norm, int c) {
        return model.predict(x, t_norm, c);
      },
      batch, sched, draws);
}

double denoising_loss_grad(const ToyDenoiser& model,
                           std::span<const Example> batch,
                           const NoiseSchedule& sched, RngStream draws,
                           Vec& grad) {
  grad = Vec::Zero(model.spec().param_count());
  const double n = static_cast<double>(batch.size());
  double total = 0.0;
  Vec eps;
  ToyDenoiser::Cache cache;
  for (const Example& ex : batch) {
    const int t = 1 + static_cast<int>(draws.below(sched.T));
    eps.resize(ex.x0.size());
    for (Eigen::Index i = 0; i < eps.size(); ++i) eps[i] = draws.normal();
    const LatentSample ls = forward_noise(ex.x0, t, eps, sched);
    const Vec pred =
        model.predict(ls.x, static_cast<double>(t) / sched.T, ex.c, cache);
    const Vec resid = pred - eps;
    total += resid.squaredNorm();
    model.accumulate_grad(cache, (2.0 / n) * resid, grad);
  }
  return total / n;
}

Vec cfg_predict(const ToyDenoiser& model, const Vec& x, double t_norm, int cond,
                double guidance) {
  return cfg_predict(
      [&](const Vec& xx, double tn, int c) { return model.predict(xx, tn, c); },
      x, t_norm, cond, model.spec().null_cond(), guidance);
}

Vec ddim_sample(const ToyDenoiser& model, int cond, const NoiseSchedule& sched,
                double guidance, RngStream draws) {
  return ddim_sample_with(
      [&](const Vec& x, double t_norm) {
        return cfg_predict(model, x, t_norm, cond, guidance);
      },
      sched, model.spec().data_dim, draws);
}

}  // namespace dedpo
