#include "dedpo/linear_model.hpp"

#include <cmath>
#include <stdexcept>

namespace dedpo {

LinearWorld make_linear_world(int dim, double norm, std::uint64_t seed) {
  if (dim <= 0) throw std::invalid_argument("make_linear_world: dim <= 0");
  RngStream rng = RngStream::root(seed);
  Vec dir(dim);
  for (int i = 0; i < dim; ++i) dir[i] = rng.normal();
  LinearWorld w;
  w.theta_true = dir * (norm / dir.norm());
  return w;
}

LinearSample draw_linear_sample(const LinearWorld& world, int n,
                                double labeled_fraction, std::uint64_t seed) {
  if (n <= 0) throw std::invalid_argument("draw_linear_sample: n <= 0");
  if (labeled_fraction < 0.0 || labeled_fraction > 1.0)
    throw std::invalid_argument("draw_linear_sample: bad labeled fraction");
  const int dim = static_cast<int>(world.theta_true.size());
  RngStream feat = RngStream::root(seed).split(0);
  RngStream labels = RngStream::root(seed).split(1);
  RngStream subset = RngStream::root(seed).split(2);

  LinearSample s;
  s.phi.resize(n, dim);
  s.z.resize(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < dim; ++j) s.phi(i, j) = feat.normal();
    const double p = sigmoid(s.phi.row(i).dot(world.theta_true));
    s.z[i] = labels.bernoulli(p) ? 1.0 : 0.0;
  }
  s.n_labeled = static_cast<int>(std::lround(labeled_fraction * n));
  s.labeled.assign(n, 0);
  for (std::size_t i : subset.sample_without_replacement(n, s.n_labeled))
    s.labeled[i] = 1;
  return s;
}

Vec erm_logistic(const Mat& phi, const Vec& targets, const Vec& weights,
                 double tol, int max_iter) {
  const int n = static_cast<int>(phi.rows());
  const int dim = static_cast<int>(phi.cols());
  if (targets.size() != n || weights.size() != n)
    throw std::invalid_argument("erm_logistic: size mismatch");
  if ((weights.array() < 0.0).any())
    throw std::invalid_argument("erm_logistic: negative weight");

  Vec theta = Vec::Zero(dim);
  for (int it = 0; it < max_iter; ++it) {
    const Vec logits = phi * theta;
    Vec p(n);
    for (int i = 0; i < n; ++i) p[i] = sigmoid(logits[i]);
    const Vec grad = phi.transpose() * weights.cwiseProduct(p - targets);
    if (grad.norm() <= tol) break;
    const Vec curved =
        weights.cwiseProduct(p.cwiseProduct((1.0 - p.array()).matrix()));
    Mat hess = phi.transpose() * curved.asDiagonal() * phi;
    hess.diagonal().array() += 1e-12;
    theta -= hess.ldlt().solve(grad);
  }
  return theta;
}

Vec injected_scores(const LinearWorld& world, const Mat& phi, double eps,
                    double gain) {
  const double blend = eps * gain;
  if (blend < 0.0 || blend > 1.0)
    throw std::invalid_argument("injected_scores: eps * gain outside [0, 1]");
  Vec g(phi.rows());
  for (Eigen::Index i = 0; i < phi.rows(); ++i) {
    const double gstar = sigmoid(phi.row(i).dot(world.theta_true));
    g[i] = gstar + blend * (0.5 - gstar);
  }
  return g;
}

Vec estimator_targets(EstimatorKind kind, const LinearSample& s,
                      const Vec& ghat) {
  const Eigen::Index n = s.z.size();
  if (ghat.size() != n)
    throw std::invalid_argument("estimator_targets: size mismatch");
  Vec t(n);
  switch (kind) {
    case EstimatorKind::FullLabelDPO:
      t = s.z;
      return t;
    case EstimatorKind::OutcomeRegression:
      for (Eigen::Index i = 0; i < n; ++i)
        t[i] = s.labeled[i] ? s.z[i] : ghat[i];
      return t;
    case EstimatorKind::DeDPO: {
      if (s.n_labeled == 0)
        throw std::invalid_argument("estimator_targets: no labeled samples");
      const double ratio =
          static_cast<double>(n) / static_cast<double>(s.n_labeled);
      for (Eigen::Index i = 0; i < n; ++i) {
        t[i] = s.labeled[i] ? ghat[i] + ratio * (s.z[i] - ghat[i]) : ghat[i];
      }
      return t;
    }
    case EstimatorKind::LabeledOnlyDPO:
      throw std::invalid_argument(
          "estimator_targets: labeled-only weighting is not uniform");
  }
  throw std::logic_error("unreachable");
}

namespace {

Vec uniform_weights(Eigen::Index n) {
  return Vec::Constant(n, 1.0 / static_cast<double>(n));
}

Vec population_proxy(const LinearWorld& world, const RateStudyConfig& cfg,
                     std::uint64_t seed, int max_n) {
  const int n_star = cfg.star_multiplier * max_n;
  const LinearSample s = draw_linear_sample(world, n_star, 1.0, seed);
  return erm_logistic(s.phi, s.z, uniform_weights(n_star));
}

// Least squares of y = c + a * x; returns the residual sum of squares.
double affine_sse(std::span<const double> x, std::span<const double> y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double denom = n * sxx - sx * sx;
  const double a = (n * sxy - sx * sy) / denom;
  const double c = (sy - a * sx) / n;
  double sse = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - (c + a * x[i]);
    sse += r * r;
  }
  return sse;
}

}  // namespace

double fit_rate(std::span<const double> n_values,
                std::span<const double> errors) {
  if (n_values.size() != errors.size() || n_values.size() < 2)
    throw std::invalid_argument("fit_rate: need at least two points");
  const double n = static_cast<double>(n_values.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n_values.size(); ++i) {
    const double x = std::log(n_values[i]);
    const double y = std::log(errors[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

RateStudyResult run_rate_study(const RateStudyConfig& cfg, EstimatorKind kind,
                               std::uint64_t seed) {
  const LinearWorld world = make_linear_world(
      cfg.feature_dim, cfg.theta_norm,
      RngStream::root(seed).split(100).next_u64());
  int max_n = 0;
  for (int n : cfg.grid_n) max_n = std::max(max_n, n);
  const Vec theta_star = population_proxy(
      world, cfg, RngStream::root(seed).split(101).next_u64(), max_n);

  RateStudyResult out;
  for (std::size_t ni = 0; ni < cfg.grid_n.size(); ++ni) {
    const int n = cfg.grid_n[ni];
    double sum = 0.0;
    for (int si = 0; si < cfg.rate_seeds; ++si) {
      const std::uint64_t cell_seed =
          RngStream::root(seed).split(200).split(ni).split(si).next_u64();
      const LinearSample s =
          draw_linear_sample(world, n, cfg.labeled_fraction, cell_seed);
      const Vec ghat = injected_scores(world, s.phi, 0.0, cfg.inject_gain);
      const Vec targets = estimator_targets(kind, s, ghat);
      const Vec theta_hat = erm_logistic(s.phi, targets, uniform_weights(n));
      const double err = (theta_hat - theta_star).squaredNorm();
      out.points.push_back({n, 0.0, si, err});
      sum += err;
    }
    out.mean_error.push_back(sum / cfg.rate_seeds);
  }
  std::vector<double> ns(cfg.grid_n.begin(), cfg.grid_n.end());
  out.slope = fit_rate(ns, out.mean_error);
  return out;
}

EpsStudyResult run_eps_study(const RateStudyConfig& cfg, EstimatorKind kind,
                             std::uint64_t seed) {
  const LinearWorld world = make_linear_world(
      cfg.feature_dim, cfg.theta_norm,
      RngStream::root(seed).split(100).next_u64());
  int max_n = 0;
  for (int n : cfg.grid_n) max_n = std::max(max_n, n);
  const Vec theta_star = population_proxy(
      world, cfg, RngStream::root(seed).split(101).next_u64(), max_n);

  EpsStudyResult out;
  for (std::size_t ei = 0; ei < cfg.eps_grid.size(); ++ei) {
    const double eps = cfg.eps_grid[ei];
    double sum = 0.0;
    for (int si = 0; si < cfg.eps_seeds; ++si) {
      // The sample depends only on the seed index, so the same data is reused
      // across the eps grid and the response curve is paired.
      const std::uint64_t cell_seed =
          RngStream::root(seed).split(300).split(si).next_u64();
      const LinearSample s =
          draw_linear_sample(world, cfg.eps_n, cfg.labeled_fraction, cell_seed);
      const Vec ghat = injected_scores(world, s.phi, eps, cfg.inject_gain);
      const Vec targets = estimator_targets(kind, s, ghat);
      const Vec theta_hat =
          erm_logistic(s.phi, targets, uniform_weights(cfg.eps_n));
      const double err = (theta_hat - theta_star).squaredNorm();
      out.points.push_back({cfg.eps_n, eps, si, err});
      sum += err;
    }
    out.mean_error.push_back(sum / cfg.eps_seeds);
  }
  std::vector<double> lin(cfg.eps_grid.size()), quart(cfg.eps_grid.size());
  for (std::size_t i = 0; i < cfg.eps_grid.size(); ++i) {
    lin[i] = cfg.eps_grid[i];
    quart[i] = std::pow(cfg.eps_grid[i], 4);
  }
  out.sse_linear = affine_sse(lin, out.mean_error);
  out.sse_quartic = affine_sse(quart, out.mean_error);
  return out;
}

}  // namespace dedpo
