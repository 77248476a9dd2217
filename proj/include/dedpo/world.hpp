#pragma once

#include <cstdint>
#include <vector>

#include "dedpo/preference.hpp"
#include "dedpo/rng.hpp"

namespace dedpo {

// Synthetic ground truth: an isotropic Gaussian mixture with one mode per
// corner, and per-condition preferences that reward proximity to the mode
// assigned to the condition.
struct WorldSpec {
  Mat mode_centers;        // one row per mode
  double mode_sigma = 0.4;
  int n_conditions = 4;    // condition c prefers mode c % n_modes
  Vec anchor;              // reference point for the systematic annotator bias

  // Four modes at (+-2, +-2) in the plane, four conditions, anchor at the
  // first mode center.
  static WorldSpec four_modes();

  int data_dim() const { return static_cast<int>(mode_centers.cols()); }
  int n_modes() const { return static_cast<int>(mode_centers.rows()); }
  int preferred_mode(int c) const;
};

// Larger is better: negative distance to the preferred mode center.
double preference_score(const WorldSpec& w, int c, const Vec& x);

// Deterministic comparison; distance ties break lexicographically on the
// coordinates so any two distinct points have a strict winner.  Throws on
// exactly identical points.
int true_preference(const WorldSpec& w, int c, const Vec& x0, const Vec& x1);

Vec draw_mixture(const WorldSpec& w, RngStream& rng);

struct Dataset {
  std::vector<PreferenceTriplet> labeled;
  std::vector<PreferenceTriplet> unlabeled;

  int n_l() const { return static_cast<int>(labeled.size()); }
  int n_u() const { return static_cast<int>(unlabeled.size()); }
  int n() const { return n_l() + n_u(); }
  // Inverse labeling rate (n_l + n_u) / n_l; throws when nothing is labeled.
  double label_ratio() const;
};

// Draws n_pairs candidate pairs from the mixture with uniformly random
// conditions, labels every pair by the true preference rule, then keeps the
// labels on a uniformly chosen subset of round(n_pairs * labeled_fraction)
// pairs.  Ids are id_base..id_base+n_pairs-1 in generation order; the same
// seed always produces the same pairs regardless of labeled_fraction, and
// id_base lets callers keep separate datasets in disjoint id spaces.
Dataset generate(const WorldSpec& w, int n_pairs, double labeled_fraction,
                 std::uint64_t seed, std::int64_t id_base = 0);

}  // namespace dedpo
