#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "dedpo/io.hpp"
#include "dedpo/linear_model.hpp"
#include "dedpo/trainer.hpp"

namespace dedpo {

// Grid description for the robustness matrix: which estimators to train,
// at which calibrated annotator accuracies, on which dataset sizes, over how
// many seeds.  One cell = one training run; cells sharing a seed index share
// the dataset and the pretrained reference, so comparisons are paired.
struct SweepConfig {
  std::vector<EstimatorKind> estimators = {EstimatorKind::DeDPO,
                                           EstimatorKind::OutcomeRegression};
  std::vector<double> accuracies = {0.8, 0.95};
  std::vector<int> n_l_list = {250, 1250};
  int n_u_factor = 3;
  int seeds = 2;

  int T = 50;
  ScheduleKind schedule = ScheduleKind::linear;
  PretrainConfig pretrain;
  double beta = 1.0;
  int train_steps = 1000;
  int batch_size = 64;
  double lr = 1e-3;
  int warmup = 10;
  int eval_samples = 200;
  double eval_guidance = 1.0;

  int calib_pairs = 2000;
  double bias_scale = 1.0;

  bool with_rate = false;
  RateStudyConfig rate;
};

struct CellSpec {
  EstimatorKind estimator = EstimatorKind::DeDPO;
  double accuracy = 0.8;
  int n_l = 0;
  int n_u = 0;
  int seed_index = 0;
};

// The reference model for a seed index; every cell with that index starts
// preference training from the same pretrained weights.
ToyDenoiser make_reference(const SweepConfig& cfg, const WorldSpec& w,
                           const NoiseSchedule& sched, std::uint64_t root_seed,
                           int seed_index);

// Runs one cell end to end: dataset, calibrated annotator, training,
// evaluation.  Divergence is captured in the row status instead of thrown.
// Full-label cells regenerate the same pairs fully labeled and skip the
// annotator.
SweepRow run_cell(const SweepConfig& cfg, const WorldSpec& w,
                  const NoiseSchedule& sched, const ToyDenoiser& ref,
                  const CellSpec& cell, std::uint64_t root_seed);

struct SweepResult {
  std::vector<SweepRow> rows;
  std::optional<RateStudyResult> rate;
};

// Full grid, optionally in parallel; row order is the deterministic nested
// loop (estimator, accuracy, n_l, seed) regardless of thread scheduling.
SweepResult run_sweep(const SweepConfig& cfg, std::uint64_t root_seed,
                      int jobs);

// Mean win rate per (estimator, n_u) at one accuracy, shaped for plotting.
std::vector<SvgSeries> sweep_series_for_accuracy(
    const std::vector<SweepRow>& rows, double accuracy);

}  // namespace dedpo
