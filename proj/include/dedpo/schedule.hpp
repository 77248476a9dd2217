#pragma once

#include <string>

#include "dedpo/types.hpp"

namespace dedpo {

enum class ScheduleKind { linear, cosine };

ScheduleKind parse_schedule_kind(const std::string& name);
std::string schedule_kind_name(ScheduleKind kind);

// Discrete forward-noising schedule on timesteps 0..T.  Signal weight alpha
// decreases from exactly 1 to exactly 0 while noise weight sigma rises from
// exactly 0 to exactly 1; both endpoints are pinned after the fill so that
// t = 0 reproduces the data and t = T is pure noise, bit for bit.
struct NoiseSchedule {
  int T = 0;
  Vec alpha;  // length T + 1
  Vec sigma;  // length T + 1
};

NoiseSchedule make_schedule(int T, ScheduleKind kind);

// A point on the forward process: x = alpha_t * x0 + sigma_t * eps.
struct LatentSample {
  Vec x;
  Vec x0;
  Vec eps;
  int t = 0;
};

LatentSample forward_noise(const Vec& x0, int t, const Vec& eps,
                           const NoiseSchedule& sched);

}  // namespace dedpo
