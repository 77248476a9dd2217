#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>

namespace dedpo {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

template <class Scalar>
using VecT = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <class Scalar>
using MatT = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

// Numerically stable logistic function; exact 0.5 at zero.
template <class Scalar>
inline Scalar sigmoid(Scalar x) {
  if (x >= Scalar(0)) return Scalar(1) / (Scalar(1) + std::exp(-x));
  const Scalar e = std::exp(x);
  return e / (Scalar(1) + e);
}

inline double logit(double p) { return std::log(p) - std::log1p(-p); }

// Probabilities entering logarithms are clamped away from {0, 1}; targets are
// never clamped.
inline constexpr double kProbEps = 1e-12;

inline double clamp_prob(double p) {
  return std::clamp(p, kProbEps, 1.0 - kProbEps);
}

}  // namespace dedpo
