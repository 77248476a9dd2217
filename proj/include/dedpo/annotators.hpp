#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "dedpo/preference.hpp"
#include "dedpo/world.hpp"

namespace dedpo {

// Source of (possibly soft, possibly wrong) preference scores for pairs the
// true label of which is unknown.  annotate returns the estimated probability
// that x1 is preferred, always in [0, 1].
class Annotator {
 public:
  virtual ~Annotator() = default;
  virtual std::string name() const = 0;
  virtual double annotate(const PreferenceTriplet& y) const = 0;
  // Ids of the labeled pairs this annotator was fit or calibrated on, so
  // callers can detect overlap with the training set.
  virtual const std::vector<std::int64_t>& calibration_ids() const;
  // True when the annotator is statistically coupled to the trained policy
  // (e.g. it is a snapshot of it), which breaks the independence assumption
  // behind the unbiasedness argument.
  virtual bool depends_on_policy() const { return false; }
};

// Ground truth preferences, as hard 0/1 scores.
std::shared_ptr<Annotator> make_oracle_annotator(const WorldSpec& w);

// Ground truth with each label independently flipped with probability
// flip_prob; the flip coin is a pure hash of (seed, id), so scores are
// frozen across calls.
std::shared_ptr<Annotator> make_flip_annotator(const WorldSpec& w,
                                               double flip_prob,
                                               std::uint64_t seed);

// Soft scores sigmoid(signal_scale * margin + bias_scale * anchor_pull) where
// margin is the true score difference and anchor_pull rewards the candidate
// closer to the world's anchor point.  The anchor term is a systematic error
// that no amount of data averages away.
std::shared_ptr<Annotator> make_biased_annotator(const WorldSpec& w,
                                                 double signal_scale,
                                                 double bias_scale);

struct CalibratedAnnotator {
  std::shared_ptr<Annotator> annotator;
  double signal_scale = 0.0;
  double achieved_agreement = 0.0;
};

// Bisects signal_scale in [0, 64] so that the biased annotator's rounded
// scores agree with the true labels on the calibration set at the target
// rate.  The calibration pairs must be labeled; their ids are recorded on the
// returned annotator.
CalibratedAnnotator calibrate_biased_annotator(
    const WorldSpec& w, double target_agreement, double bias_scale,
    std::span<const PreferenceTriplet> calibration);

// Table-driven scores by triplet id; unknown ids throw.
std::shared_ptr<Annotator> make_fixed_annotator(
    std::unordered_map<std::int64_t, double> table);

enum class SelfTrainAugment { none, three_timesteps };

SelfTrainAugment parse_self_train_augment(const std::string& name);

// A pseudo-label with a 0/1 confidence gate; weight 0 means the pair is
// ignored by the objective.
struct GatedLabel {
  double label = 0.0;
  double weight = 0.0;
};

// Pseudo-labeler backed by a frozen snapshot of the policy itself.  Scores
// are the snapshot's win probabilities; gated labels zero out pairs whose
// confidence |G - 0.5| falls below tau - 0.5.  When the snapshot equals the
// reference model every margin is exactly zero, every confidence is exactly
// zero, and every gate closes.
class SelfTrainingAnnotator : public Annotator {
 public:
  // tau must lie in (0.5, 1].
  SelfTrainingAnnotator(const ToyDenoiser& ref, const NoiseSchedule& sched,
                        double beta, double tau, SelfTrainAugment augment,
                        std::uint64_t seed);

  // Replaces the snapshot with a copy of the current policy parameters.
  void snapshot(const ToyDenoiser& policy);
  const ToyDenoiser& snapshot_model() const { return snapshot_; }

  std::string name() const override { return "self_training"; }
  double annotate(const PreferenceTriplet& y) const override;
  bool depends_on_policy() const override { return true; }

  // Gate and label computed on the caller's draw (plus two internally drawn
  // extra timesteps when augment = three_timesteps).
  GatedLabel gated_label(const PreferenceTriplet& y, const MarginDraw& d) const;

  double tau() const { return tau_; }

 private:
  double score(const PreferenceTriplet& y, const MarginDraw& d) const;

  ToyDenoiser snapshot_;
  ToyDenoiser ref_;
  NoiseSchedule sched_;
  double beta_;
  double tau_;
  SelfTrainAugment augment_;
  std::uint64_t seed_;
};

// Debiased objective with self-training pseudo-labels: every pseudo-target
// appearance (pooled term and the subtracted correction term) carries the
// pair's gate weight, while true labels stay ungated.  When the snapshot
// equals the reference all gates are zero and the value collapses to the
// labeled-only mean exactly.
double loss_dedpo_selftrain(const ToyDenoiser& policy, const ToyDenoiser& ref,
                            std::span<const PreferenceTriplet> labeled,
                            std::span<const PreferenceTriplet> unlabeled,
                            const SelfTrainingAnnotator& annot,
                            const WeightFn& weight, double beta,
                            const NoiseSchedule& sched, std::uint64_t seed,
                            Vec* grad = nullptr);

// Pooled imputation with gated pseudo-labels on the unlabeled pairs.
double loss_or_selftrain(const ToyDenoiser& policy, const ToyDenoiser& ref,
                         std::span<const PreferenceTriplet> labeled,
                         std::span<const PreferenceTriplet> unlabeled,
                         const SelfTrainingAnnotator& annot, double beta,
                         const NoiseSchedule& sched, std::uint64_t seed,
                         Vec* grad = nullptr);

struct AnnotatorReport {
  double agreement = 0.0;
  int n = 0;
  // confusion[z][rounded score]
  std::array<std::array<int, 2>, 2> confusion = {{{0, 0}, {0, 0}}};
};

// Agreement of rounded scores with true labels on a labeled held-out set;
// throws on empty input or unlabeled pairs.
AnnotatorReport evaluate_annotator(const Annotator& a,
                                   std::span<const PreferenceTriplet> heldout);

}  // namespace dedpo
