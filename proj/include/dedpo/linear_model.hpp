#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dedpo/preference.hpp"
#include "dedpo/rng.hpp"
#include "dedpo/types.hpp"

namespace dedpo {

// Logistic preference world with linear features, where the exact empirical
// minimizer is computable by Newton's method.  This isolates the estimators'
// statistical behavior from optimization noise: parameter error against the
// population minimizer can be measured to machine precision, so convergence
// rates and the response to annotator error become measurable.
struct LinearWorld {
  Vec theta_true;
};

LinearWorld make_linear_world(int dim, double norm, std::uint64_t seed);

struct LinearSample {
  Mat phi;                    // n x dim standard normal features
  Vec z;                      // labels in {0, 1}
  std::vector<char> labeled;  // exact round(n * fraction) ones
  int n_labeled = 0;
};

LinearSample draw_linear_sample(const LinearWorld& world, int n,
                                double labeled_fraction, std::uint64_t seed);

// Weighted logistic regression via damped Newton.  Weights must be
// nonnegative; targets are unrestricted since the curvature does not depend
// on them.  Converges to gradient norm <= tol.
Vec erm_logistic(const Mat& phi, const Vec& targets, const Vec& weights,
                 double tol = 1e-11, int max_iter = 200);

// Annotator scores for the linear world: the true conditional mean pulled
// toward 0.5 by eps * gain.  eps = 0 is a perfect annotator; eps * gain = 1
// is completely uninformative.  Requires eps * gain <= 1.
Vec injected_scores(const LinearWorld& world, const Mat& phi, double eps,
                    double gain);

// Per-sample targets of the chosen estimator (full labels, pooled imputation,
// or debiased combination with the exact global ratio).
Vec estimator_targets(EstimatorKind kind, const LinearSample& s,
                      const Vec& ghat);

struct RateStudyConfig {
  int feature_dim = 6;
  double theta_norm = 2.2;
  double labeled_fraction = 0.25;
  double inject_gain = 5.0;
  std::vector<int> grid_n = {250, 500, 1000, 2000, 4000};
  int rate_seeds = 20;
  std::vector<double> eps_grid = {0.0, 0.05, 0.1, 0.2};
  int eps_seeds = 48;
  int eps_n = 2000;
  int star_multiplier = 100;  // population-proxy sample = multiplier * max n
};

struct RatePoint {
  int n = 0;
  double eps = 0.0;
  int seed = 0;
  double error = 0.0;  // squared distance to the population proxy
};

struct RateStudyResult {
  std::vector<RatePoint> points;
  std::vector<double> mean_error;  // per grid_n entry
  double slope = 0.0;              // log-log least squares
};

// Squared-error decay in n for a perfect annotator.
RateStudyResult run_rate_study(const RateStudyConfig& cfg, EstimatorKind kind,
                               std::uint64_t seed);

struct EpsStudyResult {
  std::vector<RatePoint> points;
  std::vector<double> mean_error;  // per eps_grid entry
  double sse_linear = 0.0;         // residual of error ~ c + a * eps
  double sse_quartic = 0.0;        // residual of error ~ c + a * eps^4
};

// Squared-error response to annotator error at fixed n.
EpsStudyResult run_eps_study(const RateStudyConfig& cfg, EstimatorKind kind,
                             std::uint64_t seed);

// Slope of log(err) against log(n) by least squares.
double fit_rate(std::span<const double> n_values, std::span<const double> errors);

}  // namespace dedpo
