#include "dedpo/annotators.hpp"

#include <cmath>
#include <stdexcept>

namespace dedpo {

const std::vector<std::int64_t>& Annotator::calibration_ids() const {
  static const std::vector<std::int64_t> none;
  return none;
}

namespace {

// True-score margin (positive favors x1) and anchor pull (positive when x1 is
// closer to the anchor).
struct PairFeatures {
  double delta;
  double pull;
};

PairFeatures pair_features(const WorldSpec& w, const PreferenceTriplet& y) {
  PairFeatures f;
  f.delta = preference_score(w, y.c, y.x1) - preference_score(w, y.c, y.x0);
  f.pull = (y.x0 - w.anchor).norm() - (y.x1 - w.anchor).norm();
  return f;
}

class OracleAnnotator final : public Annotator {
 public:
  explicit OracleAnnotator(WorldSpec w) : w_(std::move(w)) {}
  std::string name() const override { return "oracle"; }
  double annotate(const PreferenceTriplet& y) const override {
    return static_cast<double>(true_preference(w_, y.c, y.x0, y.x1));
  }

 private:
  WorldSpec w_;
};

class FlipAnnotator final : public Annotator {
 public:
  FlipAnnotator(WorldSpec w, double p, std::uint64_t seed)
      : w_(std::move(w)), p_(p), seed_(seed) {
    if (p < 0.0 || p > 1.0)
      throw std::invalid_argument("flip probability outside [0, 1]");
  }
  std::string name() const override { return "flip"; }
  double annotate(const PreferenceTriplet& y) const override {
    const int t = true_preference(w_, y.c, y.x0, y.x1);
    const bool flip = RngStream::root(seed_)
                          .split(static_cast<std::uint64_t>(y.id))
                          .bernoulli(p_);
    return static_cast<double>(flip ? 1 - t : t);
  }

 private:
  WorldSpec w_;
  double p_;
  std::uint64_t seed_;
};

class BiasedAnnotator final : public Annotator {
 public:
  BiasedAnnotator(WorldSpec w, double signal_scale, double bias_scale)
      : w_(std::move(w)), s_(signal_scale), b_(bias_scale) {}
  std::string name() const override { return "biased"; }
  double annotate(const PreferenceTriplet& y) const override {
    const PairFeatures f = pair_features(w_, y);
    return sigmoid(s_ * f.delta + b_ * f.pull);
  }
  void set_calibration_ids(std::vector<std::int64_t> ids) {
    calib_ids_ = std::move(ids);
  }
  const std::vector<std::int64_t>& calibration_ids() const override {
    return calib_ids_;
  }

 private:
  WorldSpec w_;
  double s_;
  double b_;
  std::vector<std::int64_t> calib_ids_;
};

class FixedAnnotator final : public Annotator {
 public:
  explicit FixedAnnotator(std::unordered_map<std::int64_t, double> table)
      : table_(std::move(table)) {
    for (const auto& [id, v] : table_) {
      if (!(v >= 0.0 && v <= 1.0))
        throw std::invalid_argument("fixed annotator: score outside [0, 1]");
    }
  }
  std::string name() const override { return "fixed"; }
  double annotate(const PreferenceTriplet& y) const override {
    const auto it = table_.find(y.id);
    if (it == table_.end())
      throw std::out_of_range("fixed annotator: unknown triplet id " +
                              std::to_string(y.id));
    return it->second;
  }

 private:
  std::unordered_map<std::int64_t, double> table_;
};

}  // namespace

std::shared_ptr<Annotator> make_oracle_annotator(const WorldSpec& w) {
  return std::make_shared<OracleAnnotator>(w);
}

std::shared_ptr<Annotator> make_flip_annotator(const WorldSpec& w,
                                               double flip_prob,
                                               std::uint64_t seed) {
  return std::make_shared<FlipAnnotator>(w, flip_prob, seed);
}

std::shared_ptr<Annotator> make_biased_annotator(const WorldSpec& w,
                                                 double signal_scale,
                                                 double bias_scale) {
  return std::make_shared<BiasedAnnotator>(w, signal_scale, bias_scale);
}

CalibratedAnnotator calibrate_biased_annotator(
    const WorldSpec& w, double target_agreement, double bias_scale,
    std::span<const PreferenceTriplet> calibration) {
  if (calibration.empty())
    throw std::invalid_argument("calibration set is empty");
  if (target_agreement <= 0.5 || target_agreement > 1.0)
    throw std::invalid_argument("target agreement must lie in (0.5, 1]");
  for (const PreferenceTriplet& y : calibration) {
    if (!y.labeled())
      throw std::invalid_argument("calibration set contains unlabeled pairs");
  }

  auto agreement_at = [&](double s) {
    int agree = 0;
    for (const PreferenceTriplet& y : calibration) {
      const PairFeatures f = pair_features(w, y);
      const int pred = sigmoid(s * f.delta + bias_scale * f.pull) >= 0.5;
      agree += (pred == *y.z);
    }
    return static_cast<double>(agree) / static_cast<double>(calibration.size());
  };

  // Agreement grows with the signal scale; bisect for the smallest scale
  // reaching the target.
  double lo = 0.0, hi = 64.0;
  for (int it = 0; it < 50; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (agreement_at(mid) < target_agreement) {
      lo = mid;
    } else {
      hi = mid;
    }
  }

  auto annot = std::make_shared<BiasedAnnotator>(w, hi, bias_scale);
  std::vector<std::int64_t> ids;
  ids.reserve(calibration.size());
  for (const PreferenceTriplet& y : calibration) ids.push_back(y.id);
  annot->set_calibration_ids(std::move(ids));

  CalibratedAnnotator out;
  out.annotator = annot;
  out.signal_scale = hi;
  out.achieved_agreement = agreement_at(hi);
  return out;
}

std::shared_ptr<Annotator> make_fixed_annotator(
    std::unordered_map<std::int64_t, double> table) {
  return std::make_shared<FixedAnnotator>(std::move(table));
}

SelfTrainAugment parse_self_train_augment(const std::string& name) {
  if (name == "none") return SelfTrainAugment::none;
  if (name == "three_timesteps") return SelfTrainAugment::three_timesteps;
  throw std::invalid_argument("unknown self-training augmentation: " + name);
}

SelfTrainingAnnotator::SelfTrainingAnnotator(const ToyDenoiser& ref,
                                             const NoiseSchedule& sched,
                                             double beta, double tau,
                                             SelfTrainAugment augment,
                                             std::uint64_t seed)
    : snapshot_(ref),
      ref_(ref),
      sched_(sched),
      beta_(beta),
      tau_(tau),
      augment_(augment),
      seed_(seed) {
  if (!(tau > 0.5 && tau <= 1.0))
    throw std::invalid_argument("self-training tau must lie in (0.5, 1]");
}

void SelfTrainingAnnotator::snapshot(const ToyDenoiser& policy) {
  if (!(policy.spec() == snapshot_.spec()))
    throw std::invalid_argument("snapshot: mismatched model architecture");
  snapshot_.params() = policy.params();
}

double SelfTrainingAnnotator::score(const PreferenceTriplet& y,
                                    const MarginDraw& d) const {
  const MarginSample s{&y, d};
  return g_theta(snapshot_, ref_, s, sched_, beta_);
}

GatedLabel SelfTrainingAnnotator::gated_label(const PreferenceTriplet& y,
                                              const MarginDraw& d) const {
  double g = score(y, d);
  if (augment_ == SelfTrainAugment::three_timesteps) {
    RngStream extra = RngStream::root(seed_)
                          .split(0x7157u)
                          .split(static_cast<std::uint64_t>(y.id));
    const int dim = static_cast<int>(y.x0.size());
    g += score(y, draw_margin(dim, sched_, extra));
    g += score(y, draw_margin(dim, sched_, extra));
    g /= 3.0;
  }
  GatedLabel out;
  out.label = g >= 0.5 ? 1.0 : 0.0;
  out.weight = std::abs(g - 0.5) >= tau_ - 0.5 ? 1.0 : 0.0;
  return out;
}

double SelfTrainingAnnotator::annotate(const PreferenceTriplet& y) const {
  RngStream rng = RngStream::root(seed_)
                      .split(0xA110u)
                      .split(static_cast<std::uint64_t>(y.id));
  return score(y, draw_margin(static_cast<int>(y.x0.size()), sched_, rng));
}

namespace {

GatedLabel gate_on_engine_draw(const SelfTrainingAnnotator& annot,
                               const PreferenceTriplet& y, std::uint64_t seed,
                               const NoiseSchedule& sched) {
  // The gate must look at the same draw the objective term will use.
  const MarginDraw d =
      margin_draw_for(seed, 0, y.id, static_cast<int>(y.x0.size()), sched);
  return annot.gated_label(y, d);
}

}  // namespace

double loss_dedpo_selftrain(const ToyDenoiser& policy, const ToyDenoiser& ref,
                            std::span<const PreferenceTriplet> labeled,
                            std::span<const PreferenceTriplet> unlabeled,
                            const SelfTrainingAnnotator& annot,
                            const WeightFn& weight, double beta,
                            const NoiseSchedule& sched, std::uint64_t seed,
                            Vec* grad) {
  if (labeled.empty())
    throw std::invalid_argument("debiased loss needs at least one labeled pair");
  const double n = static_cast<double>(labeled.size() + unlabeled.size());
  const double n_l = static_cast<double>(labeled.size());

  std::vector<GatedLabel> gl(labeled.size());
  for (std::size_t i = 0; i < labeled.size(); ++i)
    gl[i] = gate_on_engine_draw(annot, labeled[i], seed, sched);

  std::vector<LossTerm> terms;
  terms.reserve(labeled.size() * 3 + unlabeled.size());
  for (std::size_t i = 0; i < labeled.size(); ++i) {
    if (gl[i].weight != 0.0)
      terms.push_back({&labeled[i], gl[i].label, gl[i].weight / n, 0});
  }
  for (const PreferenceTriplet& y : unlabeled) {
    const GatedLabel g = gate_on_engine_draw(annot, y, seed, sched);
    if (g.weight != 0.0) terms.push_back({&y, g.label, g.weight / n, 0});
  }
  for (std::size_t i = 0; i < labeled.size(); ++i) {
    const PreferenceTriplet& y = labeled[i];
    if (!y.labeled())
      throw std::invalid_argument("debiased loss: unlabeled pair in labeled set");
    const double w = weight ? weight(y) / n : 1.0 / n_l;
    terms.push_back({&y, static_cast<double>(*y.z), w, 1});
    if (gl[i].weight != 0.0)
      terms.push_back({&y, gl[i].label, -w * gl[i].weight, 1});
  }
  return eval_loss_terms(policy, ref, terms, beta, sched, seed,
                         DrawMode::shared, grad);
}

double loss_or_selftrain(const ToyDenoiser& policy, const ToyDenoiser& ref,
                         std::span<const PreferenceTriplet> labeled,
                         std::span<const PreferenceTriplet> unlabeled,
                         const SelfTrainingAnnotator& annot, double beta,
                         const NoiseSchedule& sched, std::uint64_t seed,
                         Vec* grad) {
  const std::size_t total = labeled.size() + unlabeled.size();
  if (total == 0) throw std::invalid_argument("loss_or_selftrain: empty batch");
  const double n = static_cast<double>(total);
  std::vector<LossTerm> terms;
  terms.reserve(total);
  for (const PreferenceTriplet& y : labeled) {
    if (!y.labeled())
      throw std::invalid_argument(
          "loss_or_selftrain: unlabeled pair in labeled set");
    terms.push_back({&y, static_cast<double>(*y.z), 1.0 / n, 0});
  }
  for (const PreferenceTriplet& y : unlabeled) {
    const GatedLabel g = gate_on_engine_draw(annot, y, seed, sched);
    if (g.weight != 0.0) terms.push_back({&y, g.label, g.weight / n, 0});
  }
  return eval_loss_terms(policy, ref, terms, beta, sched, seed,
                         DrawMode::shared, grad);
}

AnnotatorReport evaluate_annotator(const Annotator& a,
                                   std::span<const PreferenceTriplet> heldout) {
  if (heldout.empty())
    throw std::invalid_argument("evaluate_annotator: empty held-out set");
  AnnotatorReport r;
  for (const PreferenceTriplet& y : heldout) {
    if (!y.labeled())
      throw std::invalid_argument(
          "evaluate_annotator: held-out pair without label");
    const int pred = a.annotate(y) >= 0.5;
    ++r.confusion[*y.z][pred];
  }
  r.n = static_cast<int>(heldout.size());
  r.agreement =
      static_cast<double>(r.confusion[0][0] + r.confusion[1][1]) / r.n;
  return r;
}

}  // namespace dedpo
