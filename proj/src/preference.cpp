#include "dedpo/preference.hpp"

#include <cmath>
#include <stdexcept>
#include <unordered_map>

#include "dedpo/annotators.hpp"

namespace dedpo {

PreferenceTriplet make_triplet(std::int64_t id, int c, Vec x0, Vec x1,
                               std::optional<int> z) {
  if (x0.size() != x1.size() || x0.size() == 0)
    throw std::invalid_argument("make_triplet: bad candidate dimensions");
  if (x0 == x1)
    throw std::invalid_argument("make_triplet: identical candidates");
  if (z && *z != 0 && *z != 1)
    throw std::invalid_argument("make_triplet: label outside {0, 1}");
  PreferenceTriplet y;
  y.id = id;
  y.c = c;
  y.x0 = std::move(x0);
  y.x1 = std::move(x1);
  y.z = z;
  return y;
}

MarginDraw draw_margin(int data_dim, const NoiseSchedule& sched,
                       RngStream& rng) {
  MarginDraw d;
  d.t = 1 + static_cast<int>(rng.below(sched.T));
  d.eps0.resize(data_dim);
  d.eps1.resize(data_dim);
  for (int i = 0; i < data_dim; ++i) d.eps0[i] = rng.normal();
  for (int i = 0; i < data_dim; ++i) d.eps1[i] = rng.normal();
  return d;
}

double bce(double a, double b) {
  if (!(a > 0.0 && a < 1.0))
    throw std::invalid_argument("bce: prediction outside (0, 1)");
  return -b * std::log(a) - (1.0 - b) * std::log1p(-a);
}

double dpo_margin(const ToyDenoiser& policy, const ToyDenoiser& ref,
                  const MarginSample& s, const NoiseSchedule& sched,
                  double beta) {
  return dpo_margin(
      [&](const Vec& x, double tn, int c) { return policy.predict(x, tn, c); },
      [&](const Vec& x, double tn, int c) { return ref.predict(x, tn, c); }, s,
      sched, beta);
}

double g_theta(const ToyDenoiser& policy, const ToyDenoiser& ref,
               const MarginSample& s, const NoiseSchedule& sched, double beta) {
  return clamp_prob(sigmoid(dpo_margin(policy, ref, s, sched, beta)));
}

EstimatorKind parse_estimator(const std::string& name) {
  if (name == "full" || name == "FullLabelDPO") return EstimatorKind::FullLabelDPO;
  if (name == "labeled_only" || name == "LabeledOnlyDPO")
    return EstimatorKind::LabeledOnlyDPO;
  if (name == "or" || name == "OR") return EstimatorKind::OutcomeRegression;
  if (name == "dedpo" || name == "DeDPO") return EstimatorKind::DeDPO;
  throw std::invalid_argument("unknown estimator: " + name);
}

std::string estimator_name(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::FullLabelDPO: return "FullLabelDPO";
    case EstimatorKind::LabeledOnlyDPO: return "LabeledOnlyDPO";
    case EstimatorKind::OutcomeRegression: return "OR";
    case EstimatorKind::DeDPO: return "DeDPO";
  }
  throw std::logic_error("unreachable");
}

double combined_target(const std::optional<int>& z, double ghat, double ratio) {
  if (!(ghat >= 0.0 && ghat <= 1.0))
    throw std::invalid_argument("combined_target: ghat outside [0, 1]");
  if (!(ratio >= 1.0))
    throw std::invalid_argument("combined_target: ratio below 1");
  if (!z) return ghat;
  if (*z != 0 && *z != 1)
    throw std::invalid_argument("combined_target: label outside {0, 1}");
  return ghat + ratio * (static_cast<double>(*z) - ghat);
}

// Draws are a pure function of (seed, lane, id): the same triplet evaluated
// under the same seed and lane always sees the same timestep and noise.
MarginDraw margin_draw_for(std::uint64_t seed, std::uint32_t lane,
                           std::int64_t id, int dim,
                           const NoiseSchedule& sched) {
  RngStream rng =
      RngStream::root(seed).split(lane).split(static_cast<std::uint64_t>(id));
  return draw_margin(dim, sched, rng);
}

namespace {

struct MarginEval {
  double g = 0.0;     // clamped win probability
  double coef = 0.0;  // accumulated d(loss)/d(margin)
  // retained only when a gradient is requested
  MarginDraw d;
  ToyDenoiser::Cache c0, c1;
  Vec p0, p1;
};

}  // namespace

double eval_loss_terms(const ToyDenoiser& policy, const ToyDenoiser& ref,
                       std::span<const LossTerm> terms, double beta,
                       const NoiseSchedule& sched, std::uint64_t seed,
                       DrawMode mode, Vec* grad) {
  if (grad) *grad = Vec::Zero(policy.spec().param_count());
  const int dim = policy.spec().data_dim;
  std::unordered_map<std::uint64_t, std::size_t> index;
  index.reserve(terms.size());
  std::vector<MarginEval> evals;
  evals.reserve(terms.size());

  double total = 0.0;
  for (const LossTerm& term : terms) {
    const std::uint32_t lane = mode == DrawMode::shared ? 0u : term.draw_lane;
    const std::uint64_t key =
        (static_cast<std::uint64_t>(term.y->id) << 8) | (lane & 0xffu);
    const auto [it, fresh] = index.try_emplace(key, evals.size());
    if (fresh) {
      evals.emplace_back();
      MarginEval& e = evals.back();
      MarginDraw d = margin_draw_for(seed, lane, term.y->id, dim, sched);
      const double tn = static_cast<double>(d.t) / sched.T;
      const Vec x0t = forward_noise(term.y->x0, d.t, d.eps0, sched).x;
      const Vec x1t = forward_noise(term.y->x1, d.t, d.eps1, sched).x;
      if (grad) {
        e.p1 = policy.predict(x1t, tn, term.y->c, e.c1);
        e.p0 = policy.predict(x0t, tn, term.y->c, e.c0);
      } else {
        e.p1 = policy.predict(x1t, tn, term.y->c);
        e.p0 = policy.predict(x0t, tn, term.y->c);
      }
      const Vec r1 = ref.predict(x1t, tn, term.y->c);
      const Vec r0 = ref.predict(x0t, tn, term.y->c);
      const double m =
          -beta *
          (((d.eps1 - e.p1).squaredNorm() - (d.eps1 - r1).squaredNorm()) -
           ((d.eps0 - e.p0).squaredNorm() - (d.eps0 - r0).squaredNorm()));
      // Infinite margins clamp to the probability bounds below; a NaN margin
      // means the model itself has blown up.
      if (std::isnan(m)) throw TrainingDiverged("margin is NaN");
      e.g = clamp_prob(sigmoid(m));
      if (grad) e.d = std::move(d);
    }
    MarginEval& e = evals[it->second];
    total += term.weight * bce(e.g, term.target);
    e.coef += term.weight * (e.g - term.target);
  }

  if (grad) {
    for (const MarginEval& e : evals) {
      if (e.coef == 0.0) continue;
      const double s = 2.0 * beta * e.coef;
      policy.accumulate_grad(e.c1, s * (e.d.eps1 - e.p1), *grad);
      policy.accumulate_grad(e.c0, -s * (e.d.eps0 - e.p0), *grad);
    }
  }
  return total;
}

double loss_full_dpo(const ToyDenoiser& policy, const ToyDenoiser& ref,
                     std::span<const PreferenceTriplet> batch, double beta,
                     const NoiseSchedule& sched, std::uint64_t seed,
                     Vec* grad) {
  if (batch.empty()) throw std::invalid_argument("loss_full_dpo: empty batch");
  std::vector<LossTerm> terms;
  terms.reserve(batch.size());
  const double w = 1.0 / static_cast<double>(batch.size());
  for (const PreferenceTriplet& y : batch) {
    if (!y.labeled())
      throw std::invalid_argument("loss_full_dpo: unlabeled pair " +
                                  std::to_string(y.id));
    terms.push_back({&y, static_cast<double>(*y.z), w, 0});
  }
  return eval_loss_terms(policy, ref, terms, beta, sched, seed,
                         DrawMode::shared, grad);
}

double loss_or(const ToyDenoiser& policy, const ToyDenoiser& ref,
               std::span<const PreferenceTriplet> labeled,
               std::span<const PreferenceTriplet> unlabeled,
               const Annotator& annot, double beta, const NoiseSchedule& sched,
               std::uint64_t seed, Vec* grad) {
  if (labeled.empty() && unlabeled.empty())
    throw std::invalid_argument("loss_or: empty batch");
  std::vector<LossTerm> terms;
  terms.reserve(labeled.size() + unlabeled.size());
  const double wl = labeled.empty() ? 0.0 : 1.0 / labeled.size();
  for (const PreferenceTriplet& y : labeled) {
    if (!y.labeled())
      throw std::invalid_argument("loss_or: unlabeled pair in labeled set");
    terms.push_back({&y, static_cast<double>(*y.z), wl, 0});
  }
  const double wu = unlabeled.empty() ? 0.0 : 1.0 / unlabeled.size();
  for (const PreferenceTriplet& y : unlabeled)
    terms.push_back({&y, annot.annotate(y), wu, 0});
  return eval_loss_terms(policy, ref, terms, beta, sched, seed,
                         DrawMode::shared, grad);
}

double loss_or_pooled(const ToyDenoiser& policy, const ToyDenoiser& ref,
                      std::span<const PreferenceTriplet> labeled,
                      std::span<const PreferenceTriplet> unlabeled,
                      const Annotator& annot, double beta,
                      const NoiseSchedule& sched, std::uint64_t seed,
                      Vec* grad) {
  const std::size_t n = labeled.size() + unlabeled.size();
  if (n == 0) throw std::invalid_argument("loss_or_pooled: empty batch");
  std::vector<LossTerm> terms;
  terms.reserve(n);
  const double w = 1.0 / static_cast<double>(n);
  for (const PreferenceTriplet& y : labeled) {
    if (!y.labeled())
      throw std::invalid_argument("loss_or_pooled: unlabeled pair in labeled set");
    terms.push_back({&y, static_cast<double>(*y.z), w, 0});
  }
  for (const PreferenceTriplet& y : unlabeled)
    terms.push_back({&y, annot.annotate(y), w, 0});
  return eval_loss_terms(policy, ref, terms, beta, sched, seed,
                         DrawMode::shared, grad);
}

namespace {

void require_labeled_for_debias(std::span<const PreferenceTriplet> labeled) {
  if (labeled.empty())
    throw std::invalid_argument("debiased loss needs at least one labeled pair");
  for (const PreferenceTriplet& y : labeled) {
    if (!y.labeled())
      throw std::invalid_argument("debiased loss: unlabeled pair in labeled set");
  }
}

}  // namespace

double loss_dedpo_3term(const ToyDenoiser& policy, const ToyDenoiser& ref,
                        std::span<const PreferenceTriplet> labeled,
                        std::span<const PreferenceTriplet> unlabeled,
                        const Annotator& annot, const WeightFn& weight,
                        double beta, const NoiseSchedule& sched,
                        std::uint64_t seed, DrawMode mode, Vec* grad) {
  require_labeled_for_debias(labeled);
  const double n = static_cast<double>(labeled.size() + unlabeled.size());
  const double n_l = static_cast<double>(labeled.size());

  std::vector<double> ghat_labeled(labeled.size());
  for (std::size_t i = 0; i < labeled.size(); ++i)
    ghat_labeled[i] = annot.annotate(labeled[i]);

  std::vector<LossTerm> terms;
  terms.reserve(labeled.size() * 3 + unlabeled.size());
  for (std::size_t i = 0; i < labeled.size(); ++i)
    terms.push_back({&labeled[i], ghat_labeled[i], 1.0 / n, 0});
  for (const PreferenceTriplet& y : unlabeled)
    terms.push_back({&y, annot.annotate(y), 1.0 / n, 0});
  for (std::size_t i = 0; i < labeled.size(); ++i) {
    const PreferenceTriplet& y = labeled[i];
    const double w = weight ? weight(y) / n : 1.0 / n_l;
    terms.push_back({&y, static_cast<double>(*y.z), w, 1});
    terms.push_back({&y, ghat_labeled[i], -w, 1});
  }
  return eval_loss_terms(policy, ref, terms, beta, sched, seed, mode, grad);
}

double loss_dedpo_combined(const ToyDenoiser& policy, const ToyDenoiser& ref,
                           std::span<const PreferenceTriplet> labeled,
                           std::span<const PreferenceTriplet> unlabeled,
                           const Annotator& annot, const WeightFn& weight,
                           double beta, const NoiseSchedule& sched,
                           std::uint64_t seed, DrawMode mode, Vec* grad) {
  require_labeled_for_debias(labeled);
  const double n = static_cast<double>(labeled.size() + unlabeled.size());
  const double default_ratio = n / static_cast<double>(labeled.size());

  std::vector<LossTerm> terms;
  terms.reserve(labeled.size() + unlabeled.size());
  for (const PreferenceTriplet& y : labeled) {
    const double ratio = weight ? weight(y) : default_ratio;
    terms.push_back(
        {&y, combined_target(y.z, annot.annotate(y), ratio), 1.0 / n, 0});
  }
  for (const PreferenceTriplet& y : unlabeled)
    terms.push_back({&y, annot.annotate(y), 1.0 / n, 0});
  return eval_loss_terms(policy, ref, terms, beta, sched, seed, mode, grad);
}

}  // namespace dedpo
