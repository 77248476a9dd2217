#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "dedpo/annotators.hpp"
#include "dedpo/linear_model.hpp"
#include "dedpo/preference.hpp"
#include "dedpo/schedule.hpp"
#include "dedpo/trainer.hpp"

namespace dedpo {

// Malformed config input; the message carries a 1-based line number.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class AnnotatorKind { oracle, flip, biased, fixed, self_training };

AnnotatorKind parse_annotator_kind(const std::string& s);
std::string annotator_kind_name(AnnotatorKind k);

struct ScheduleConfig {
  int T = 50;
  ScheduleKind kind = ScheduleKind::linear;
};

struct DatasetConfig {
  int n_pairs = 1000;
  double labeled_fraction = 0.25;
};

struct AnnotatorConfig {
  AnnotatorKind kind = AnnotatorKind::oracle;
  double accuracy = 0.8;       // biased: calibration target agreement
  double bias_scale = 1.0;     // biased: anchor pull strength
  double flip_prob = 0.2;      // flip: per-pair flip probability
  std::string table;           // fixed: score table path
  double tau = 0.7;            // self_training: confidence gate
  SelfTrainAugment augment = SelfTrainAugment::none;
  int calib_pairs = 2000;      // biased: calibration set size
};

struct TrainSection {
  EstimatorKind estimator = EstimatorKind::DeDPO;
  double beta = 1.0;
  int steps = 1000;
  int batch_size = 64;
  double lr = 1e-3;
  int warmup = 10;
  int snapshot_every = 100;
  int eval_samples = 200;
  double eval_guidance = 1.0;
};

struct SweepSection {
  std::vector<EstimatorKind> estimators = {EstimatorKind::DeDPO,
                                           EstimatorKind::OutcomeRegression};
  std::vector<double> accuracies = {0.8, 0.95};
  std::vector<int> n_l = {250, 1250};
  int n_u_factor = 3;
  int seeds = 2;
  bool rate = false;
};

struct VerifySection {
  std::vector<std::string> checks;  // empty selects every check
};

struct ExperimentConfig {
  int format_version = 1;
  ScheduleConfig schedule;
  DatasetConfig dataset;
  AnnotatorConfig annotator;
  PretrainConfig pretrain;
  TrainSection train;
  SweepSection sweep;
  RateStudyConfig rate;
  VerifySection verify;
};

// INI-style text: [section] headers, key = value lines, # or ; comments.
// Unknown sections, unknown keys, unparseable values, and a missing or
// unsupported format_version all throw ConfigError.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig parse_config_file(const std::string& path);

}  // namespace dedpo
