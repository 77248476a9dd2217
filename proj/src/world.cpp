#include "dedpo/world.hpp"

#include <stdexcept>

namespace dedpo {

WorldSpec WorldSpec::four_modes() {
  WorldSpec w;
  w.mode_centers.resize(4, 2);
  w.mode_centers << 2.0, 2.0, -2.0, 2.0, -2.0, -2.0, 2.0, -2.0;
  w.mode_sigma = 0.4;
  w.n_conditions = 4;
  w.anchor = w.mode_centers.row(0).transpose();
  return w;
}

int WorldSpec::preferred_mode(int c) const {
  if (c < 0 || c >= n_conditions)
    throw std::invalid_argument("condition id out of range");
  return c % n_modes();
}

double preference_score(const WorldSpec& w, int c, const Vec& x) {
  return -(x - w.mode_centers.row(w.preferred_mode(c)).transpose()).norm();
}

int true_preference(const WorldSpec& w, int c, const Vec& x0, const Vec& x1) {
  const double s0 = preference_score(w, c, x0);
  const double s1 = preference_score(w, c, x1);
  if (s1 > s0) return 1;
  if (s1 < s0) return 0;
  for (Eigen::Index i = 0; i < x0.size(); ++i) {
    if (x1[i] > x0[i]) return 1;
    if (x1[i] < x0[i]) return 0;
  }
  throw std::invalid_argument("true_preference: identical candidates");
}

Vec draw_mixture(const WorldSpec& w, RngStream& rng) {
  const int m = static_cast<int>(rng.below(w.n_modes()));
  Vec x = w.mode_centers.row(m).transpose();
  for (Eigen::Index i = 0; i < x.size(); ++i)
    x[i] += w.mode_sigma * rng.normal();
  return x;
}

double Dataset::label_ratio() const {
  if (labeled.empty())
    throw std::runtime_error("label_ratio: dataset has no labeled pairs");
  return static_cast<double>(n()) / static_cast<double>(n_l());
}

Dataset generate(const WorldSpec& w, int n_pairs, double labeled_fraction,
                 std::uint64_t seed, std::int64_t id_base) {
  if (n_pairs <= 0) throw std::invalid_argument("generate: n_pairs <= 0");
  if (labeled_fraction <= 0.0 || labeled_fraction > 1.0)
    throw std::invalid_argument("generate: labeled_fraction outside (0, 1]");

  RngStream pair_rng = RngStream::root(seed).split(0);
  RngStream label_rng = RngStream::root(seed).split(1);

  std::vector<PreferenceTriplet> pairs;
  pairs.reserve(n_pairs);
  for (int i = 0; i < n_pairs; ++i) {
    const int c = static_cast<int>(pair_rng.below(w.n_conditions));
    Vec x0 = draw_mixture(w, pair_rng);
    Vec x1 = draw_mixture(w, pair_rng);
    for (int guard = 0; x0 == x1; ++guard) {
      if (guard >= 1000)
        throw std::runtime_error("generate: cannot draw distinct candidates");
      x1 = draw_mixture(w, pair_rng);
    }
    pairs.push_back(make_triplet(id_base + i, c, std::move(x0), std::move(x1),
                                 std::nullopt));
    pairs.back().z = true_preference(w, c, pairs.back().x0, pairs.back().x1);
  }

  const int n_l = static_cast<int>(
      std::lround(labeled_fraction * static_cast<double>(n_pairs)));
  std::vector<std::size_t> keep =
      label_rng.sample_without_replacement(n_pairs, n_l);
  std::vector<char> is_labeled(n_pairs, 0);
  for (std::size_t i : keep) is_labeled[i] = 1;

  Dataset d;
  d.labeled.reserve(n_l);
  d.unlabeled.reserve(n_pairs - n_l);
  for (int i = 0; i < n_pairs; ++i) {
    if (is_labeled[i]) {
      d.labeled.push_back(std::move(pairs[i]));
    } else {
      pairs[i].z.reset();
      d.unlabeled.push_back(std::move(pairs[i]));
    }
  }
  return d;
}

}  // namespace dedpo
