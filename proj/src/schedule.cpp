#include "dedpo/schedule.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace dedpo {

ScheduleKind parse_schedule_kind(const std::string& name) {
  if (name == "linear") return ScheduleKind::linear;
  if (name == "cosine") return ScheduleKind::cosine;
  throw std::invalid_argument("unknown schedule kind: " + name);
}

std::string schedule_kind_name(ScheduleKind kind) {
  return kind == ScheduleKind::linear ? "linear" : "cosine";
}

NoiseSchedule make_schedule(int T, ScheduleKind kind) {
  if (T < 2) throw std::invalid_argument("schedule needs T >= 2");
  NoiseSchedule s;
  s.T = T;
  s.alpha.resize(T + 1);
  s.sigma.resize(T + 1);
  for (int t = 0; t <= T; ++t) {
    const double u = static_cast<double>(t) / T;
    if (kind == ScheduleKind::linear) {
      s.alpha[t] = 1.0 - u;
      s.sigma[t] = u;
    } else {
      s.alpha[t] = std::cos(std::numbers::pi / 2.0 * u);
      s.sigma[t] = std::sin(std::numbers::pi / 2.0 * u);
    }
  }
  // Endpoints are part of the contract, not an artifact of the formula.
  s.alpha[0] = 1.0;
  s.sigma[0] = 0.0;
  s.alpha[T] = 0.0;
  s.sigma[T] = 1.0;
  return s;
}

LatentSample forward_noise(const Vec& x0, int t, const Vec& eps,
                           const NoiseSchedule& sched) {
  if (t < 0 || t > sched.T)
    throw std::invalid_argument("forward_noise: t out of range");
  if (x0.size() != eps.size())
    throw std::invalid_argument("forward_noise: x0/eps dimension mismatch");
  LatentSample out;
  out.x0 = x0;
  out.eps = eps;
  out.t = t;
  if (t == 0) {
    out.x = x0;
  } else if (t == sched.T) {
    out.x = eps;
  } else {
    out.x = sched.alpha[t] * x0 + sched.sigma[t] * eps;
  }
  return out;
}

}  // namespace dedpo
