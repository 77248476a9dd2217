#include "dedpo/trainer.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <unordered_set>

namespace dedpo {

AdamOptimizer::AdamOptimizer(int dim, const AdamConfig& cfg)
    : cfg_(cfg), m_(Vec::Zero(dim)), v_(Vec::Zero(dim)) {}

void AdamOptimizer::step(Vec& params, const Vec& grad) {
  ++t_;
  double lr = cfg_.lr;
  if (cfg_.warmup > 0)
    lr *= std::min(1.0, static_cast<double>(t_) / cfg_.warmup);
  m_ = cfg_.beta1 * m_ + (1.0 - cfg_.beta1) * grad;
  v_ = cfg_.beta2 * v_ + (1.0 - cfg_.beta2) * grad.cwiseProduct(grad);
  const double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
  const double bc2 = 1.0 - std::pow(cfg_.beta2, t_);
  params.array() -=
      lr * (m_.array() / bc1) / ((v_.array() / bc2).sqrt() + cfg_.eps);
}

ToyDenoiser pretrain(const WorldSpec& w, const NoiseSchedule& sched,
                     const DenoiserSpec& spec, const PretrainConfig& cfg,
                     std::uint64_t seed) {
  ToyDenoiser model =
      ToyDenoiser::random_init(spec, RngStream::root(seed).split(0));
  RngStream data = RngStream::root(seed).split(1);
  AdamOptimizer opt(spec.param_count(), AdamConfig{.lr = cfg.lr});

  std::vector<Example> batch(cfg.batch_size);
  Vec grad;
  for (int step = 0; step < cfg.steps; ++step) {
    for (Example& ex : batch) {
      ex.c = static_cast<int>(data.below(w.n_conditions));
      if (data.bernoulli(cfg.null_fraction)) ex.c = spec.null_cond();
      ex.x0 = draw_mixture(w, data);
    }
    const std::uint64_t noise_seed =
        RngStream::root(seed).split(2).split(step).next_u64();
    const double loss = denoising_loss_grad(model, batch, sched,
                                            RngStream::root(noise_seed), grad);
    if (!std::isfinite(loss) || !grad.allFinite())
      throw TrainingDiverged("pretraining diverged at step " +
                             std::to_string(step));
    opt.step(model.params(), grad);
  }
  return model;
}

double win_rate_eval(const ToyDenoiser& policy, const ToyDenoiser& ref,
                     const WorldSpec& w, const NoiseSchedule& sched,
                     int n_samples, double guidance, RngStream rng) {
  if (n_samples <= 0)
    throw std::invalid_argument("win_rate_eval: n_samples <= 0");
  double credit = 0.0;
  for (int i = 0; i < n_samples; ++i) {
    const int c = i % w.n_conditions;
    // Both models consume the identical stream, so they start from the same
    // initial noise and differ only through their predictions.
    RngStream s = rng.split(i);
    const Vec xp = ddim_sample(policy, c, sched, guidance, s);
    const Vec xr = ddim_sample(ref, c, sched, guidance, s);
    if (xp == xr) {
      credit += 0.5;
    } else {
      credit += true_preference(w, c, xr, xp);
    }
  }
  return credit / n_samples;
}

namespace {

// Resolves the training pools and per-batch composition.  Batches keep the
// global labeled share so the constant global debias ratio stays calibrated
// at the batch level.
struct BatchPlan {
  bool use_unlabeled = false;
  int bs = 0;
  int bl = 0;
  int bu = 0;
};

BatchPlan plan_batches(EstimatorKind est, const Dataset& data, int batch_size) {
  BatchPlan p;
  p.use_unlabeled = (est == EstimatorKind::OutcomeRegression ||
                     est == EstimatorKind::DeDPO) &&
                    data.n_u() > 0;
  const int pool = p.use_unlabeled ? data.n() : data.n_l();
  if (pool == 0) throw std::invalid_argument("train: empty training pool");
  p.bs = std::min(batch_size, pool);
  if (p.use_unlabeled) {
    p.bl = static_cast<int>(std::lround(static_cast<double>(p.bs) *
                                        data.n_l() / data.n()));
    if (data.n_l() > 0 && p.bl == 0) p.bl = 1;
    if (p.bl > data.n_l()) p.bl = data.n_l();
    p.bu = p.bs - p.bl;
  } else {
    p.bl = p.bs;
    p.bu = 0;
  }
  return p;
}

class PoolCursor {
 public:
  PoolCursor(std::size_t size, RngStream shuffles)
      : order_(size), shuffles_(shuffles) {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    reshuffle();
  }

  std::size_t next() {
    if (pos_ == order_.size()) {
      pos_ = 0;
      ++epoch_;
      reshuffle();
    }
    return order_[pos_++];
  }

  std::uint64_t epoch() const { return epoch_; }

 private:
  void reshuffle() {
    RngStream s = shuffles_.split(epoch_);
    s.shuffle(order_);
  }

  std::vector<std::size_t> order_;
  RngStream shuffles_;
  std::size_t pos_ = 0;
  std::uint64_t epoch_ = 0;
};

}  // namespace

RunReport train(ToyDenoiser& policy, const ToyDenoiser& ref, const Dataset& data,
                const std::shared_ptr<Annotator>& annot, const WorldSpec& w,
                const NoiseSchedule& sched, const TrainConfig& cfg) {
  const auto t_start = std::chrono::steady_clock::now();
  const EstimatorKind est = cfg.estimator;

  const bool needs_annot = est == EstimatorKind::OutcomeRegression ||
                           est == EstimatorKind::DeDPO;
  if (needs_annot && !annot)
    throw std::invalid_argument("train: estimator requires an annotator");
  if (est == EstimatorKind::FullLabelDPO && data.n_u() > 0)
    throw std::invalid_argument(
        "train: full-label estimator requires a fully labeled dataset");
  if (est == EstimatorKind::DeDPO && data.n_l() == 0)
    throw std::invalid_argument("train: debiasing requires labeled pairs");

  RunReport rep;
  rep.estimator = estimator_name(est);
  rep.annotator = needs_annot ? annot->name() : "none";

  if (needs_annot) {
    if (annot->depends_on_policy())
      rep.assumption_flags.push_back("annotator_depends_on_policy");
    const auto& calib = annot->calibration_ids();
    if (!calib.empty()) {
      std::unordered_set<std::int64_t> train_ids;
      for (const auto& y : data.labeled) train_ids.insert(y.id);
      for (const auto& y : data.unlabeled) train_ids.insert(y.id);
      for (std::int64_t id : calib) {
        if (train_ids.contains(id)) {
          rep.assumption_flags.push_back("calibration_overlaps_training");
          break;
        }
      }
    }
  }

  auto* st = needs_annot
                 ? dynamic_cast<SelfTrainingAnnotator*>(annot.get())
                 : nullptr;

  const BatchPlan plan = plan_batches(est, data, cfg.batch_size);
  const double gamma =
      est == EstimatorKind::DeDPO ? data.label_ratio() : 0.0;
  const WeightFn wfn =
      est == EstimatorKind::DeDPO
          ? WeightFn([gamma](const PreferenceTriplet&) { return gamma; })
          : WeightFn{};

  PoolCursor cur_l(data.labeled.size(), RngStream::root(cfg.seed).split(10));
  PoolCursor cur_u(data.unlabeled.size(), RngStream::root(cfg.seed).split(11));

  auto batch_loss = [&](std::span<const PreferenceTriplet> bl,
                        std::span<const PreferenceTriplet> bu,
                        std::uint64_t draw_seed, Vec* grad) {
    switch (est) {
      case EstimatorKind::FullLabelDPO:
      case EstimatorKind::LabeledOnlyDPO:
        return loss_full_dpo(policy, ref, bl, cfg.beta, sched, draw_seed, grad);
      case EstimatorKind::OutcomeRegression:
        if (st)
          return loss_or_selftrain(policy, ref, bl, bu, *st, cfg.beta, sched,
                                   draw_seed, grad);
        return loss_or_pooled(policy, ref, bl, bu, *annot, cfg.beta, sched,
                              draw_seed, grad);
      case EstimatorKind::DeDPO:
        if (st)
          return loss_dedpo_selftrain(policy, ref, bl, bu, *st, wfn, cfg.beta,
                                      sched, draw_seed, grad);
        return loss_dedpo_combined(policy, ref, bl, bu, *annot, wfn, cfg.beta,
                                   sched, draw_seed, DrawMode::shared, grad);
    }
    throw std::logic_error("unreachable");
  };

  std::vector<PreferenceTriplet> batch_l, batch_u;
  Vec grad;
  AdamOptimizer opt(policy.spec().param_count(), cfg.adam);
  rep.loss_trace.reserve(cfg.steps);

  for (int step = 0; step < cfg.steps; ++step) {
    const std::uint64_t epoch =
        data.labeled.empty() ? cur_u.epoch() : cur_l.epoch();
    batch_l.clear();
    batch_u.clear();
    for (int k = 0; k < plan.bl; ++k)
      batch_l.push_back(data.labeled[cur_l.next()]);
    for (int k = 0; k < plan.bu; ++k)
      batch_u.push_back(data.unlabeled[cur_u.next()]);

    const std::uint64_t draw_seed =
        RngStream::root(cfg.seed).split(20).split(epoch).next_u64();
    const double loss = batch_loss(batch_l, batch_u, draw_seed, &grad);
    if (!std::isfinite(loss) || !grad.allFinite())
      throw TrainingDiverged("training diverged at step " +
                             std::to_string(step));
    opt.step(policy.params(), grad);
    rep.loss_trace.push_back(loss);

    if (st && cfg.snapshot_every > 0 && (step + 1) % cfg.snapshot_every == 0)
      st->snapshot(policy);
  }

  const std::uint64_t final_seed =
      RngStream::root(cfg.seed).split(21).next_u64();
  std::span<const PreferenceTriplet> unlab =
      plan.use_unlabeled ? std::span<const PreferenceTriplet>(data.unlabeled)
                         : std::span<const PreferenceTriplet>();
  rep.final_loss = batch_loss(data.labeled, unlab, final_seed, nullptr);
  rep.win_rate =
      win_rate_eval(policy, ref, w, sched, cfg.eval_samples, cfg.eval_guidance,
                    RngStream::root(cfg.seed).split(22));
  rep.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
          .count();
  return rep;
}

}  // namespace dedpo
