#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dedpo/annotators.hpp"
#include "dedpo/diffusion.hpp"
#include "dedpo/preference.hpp"
#include "dedpo/world.hpp"

namespace dedpo {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int warmup = 10;  // linear learning-rate ramp over the first steps
};

class AdamOptimizer {
 public:
  AdamOptimizer(int dim, const AdamConfig& cfg);
  void step(Vec& params, const Vec& grad);
  int steps_taken() const { return t_; }

 private:
  AdamConfig cfg_;
  Vec m_;
  Vec v_;
  int t_ = 0;
};

struct PretrainConfig {
  int steps = 4000;
  int batch_size = 128;
  double lr = 1e-3;
  double null_fraction = 0.1;  // share of batch trained unconditionally
};

// Fits a fresh denoiser to the world by denoising score matching; this is the
// reference model all preference training starts from.
ToyDenoiser pretrain(const WorldSpec& w, const NoiseSchedule& sched,
                     const DenoiserSpec& spec, const PretrainConfig& cfg,
                     std::uint64_t seed);

// Paired comparison of policy and reference samples: both are run from the
// same initial noise, condition ids cycle through the world, and the true
// preference rule scores each pair.  Bitwise-equal samples credit 0.5.
double win_rate_eval(const ToyDenoiser& policy, const ToyDenoiser& ref,
                     const WorldSpec& w, const NoiseSchedule& sched,
                     int n_samples, double guidance, RngStream rng);

struct TrainConfig {
  EstimatorKind estimator = EstimatorKind::DeDPO;
  double beta = 1.0;
  int steps = 1000;
  int batch_size = 64;
  AdamConfig adam;
  std::uint64_t seed = 0;
  int snapshot_every = 100;  // self-training snapshot cadence, in steps
  int eval_samples = 200;
  double eval_guidance = 1.0;
};

struct RunReport {
  std::string estimator;
  std::string annotator;
  double final_loss = 0.0;
  std::vector<double> loss_trace;  // batch objective per step
  double win_rate = 0.0;
  std::optional<double> param_error;
  std::vector<std::string> assumption_flags;
  double wall_time_s = 0.0;
};

// Runs preference optimization of policy against the frozen reference.
// Stratified minibatches keep the global labeled fraction; the debias ratio
// always uses global counts; per-pair draws are refreshed once per epoch.
// The report is a pure function of the inputs except for wall_time_s.
RunReport train(ToyDenoiser& policy, const ToyDenoiser& ref, const Dataset& data,
                const std::shared_ptr<Annotator>& annot, const WorldSpec& w,
                const NoiseSchedule& sched, const TrainConfig& cfg);

}  // namespace dedpo
