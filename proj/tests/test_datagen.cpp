#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "dedpo/world.hpp"

using namespace dedpo;

namespace {

Vec vec2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

}  // namespace

TEST_CASE("world geometry") {
  const WorldSpec w = WorldSpec::four_modes();
  CHECK(w.data_dim() == 2);
  CHECK(w.n_modes() == 4);
  CHECK(w.n_conditions == 4);
  CHECK(w.mode_centers.row(0) == Eigen::RowVector2d(2, 2));
  CHECK(w.mode_centers.row(2) == Eigen::RowVector2d(-2, -2));
  CHECK(w.anchor == vec2(2, 2));
  for (int c = 0; c < 4; ++c) CHECK(w.preferred_mode(c) == c);
}

TEST_CASE("preference score is negative distance to the preferred center") {
  const WorldSpec w = WorldSpec::four_modes();
  CHECK(preference_score(w, 0, vec2(2, 2)) == 0.0);
  CHECK(preference_score(w, 0, vec2(2, 5)) == doctest::Approx(-3.0));
  CHECK(preference_score(w, 1, vec2(-2, 2)) == 0.0);
  CHECK(preference_score(w, 3, vec2(2, -2)) == 0.0);
}

TEST_CASE("true preference against a brute-force reimplementation") {
  const WorldSpec w = WorldSpec::four_modes();
  RngStream rng = RngStream::root(1);
  for (int rep = 0; rep < 2000; ++rep) {
    const int c = static_cast<int>(rng.below(4));
    const Vec x0 = vec2(rng.uniform(-4, 4), rng.uniform(-4, 4));
    const Vec x1 = vec2(rng.uniform(-4, 4), rng.uniform(-4, 4));
    const Vec center = w.mode_centers.row(w.preferred_mode(c)).transpose();
    const double d0 = (x0 - center).norm();
    const double d1 = (x1 - center).norm();
    int expect;
    if (d1 < d0) {
      expect = 1;
    } else if (d1 > d0) {
      expect = 0;
    } else {
      expect = x1[0] != x0[0] ? (x1[0] > x0[0] ? 1 : 0)
                              : (x1[1] > x0[1] ? 1 : 0);
    }
    CHECK(true_preference(w, c, x0, x1) == expect);
  }
}

TEST_CASE("exact ties break lexicographically, identical points throw") {
  const WorldSpec w = WorldSpec::four_modes();
  // Equidistant from (2, 2); the lexicographically larger point wins.
  CHECK(true_preference(w, 0, vec2(1, 2), vec2(3, 2)) == 1);
  CHECK(true_preference(w, 0, vec2(3, 2), vec2(1, 2)) == 0);
  CHECK(true_preference(w, 0, vec2(2, 1), vec2(2, 3)) == 1);
  CHECK_THROWS_AS(true_preference(w, 0, vec2(1, 1), vec2(1, 1)),
                  std::invalid_argument);
}

TEST_CASE("preference is antisymmetric under swapping the candidates") {
  const WorldSpec w = WorldSpec::four_modes();
  RngStream rng = RngStream::root(2);
  for (int rep = 0; rep < 500; ++rep) {
    const int c = static_cast<int>(rng.below(4));
    const Vec x0 = vec2(rng.normal(), rng.normal());
    const Vec x1 = vec2(rng.normal(), rng.normal());
    CHECK(true_preference(w, c, x0, x1) == 1 - true_preference(w, c, x1, x0));
  }
}

TEST_CASE("generated datasets have exact counts and consistent labels") {
  const WorldSpec w = WorldSpec::four_modes();
  const Dataset d = generate(w, 1000, 0.25, 3);
  CHECK(d.n_l() == 250);
  CHECK(d.n_u() == 750);
  CHECK(d.n() == 1000);
  CHECK(d.label_ratio() == 4.0);
  for (const auto& y : d.labeled) {
    CHECK(y.labeled());
    CHECK(*y.z == true_preference(w, y.c, y.x0, y.x1));
  }
  for (const auto& y : d.unlabeled) CHECK_FALSE(y.labeled());
}

TEST_CASE("rounded labeled counts and validation") {
  const WorldSpec w = WorldSpec::four_modes();
  CHECK(generate(w, 10, 1.0, 4).n_l() == 10);
  CHECK(generate(w, 10, 0.26, 4).n_l() == 3);
  CHECK(generate(w, 7, 0.5, 4).n_l() == 4);  // round(3.5) away from zero
  CHECK_THROWS_AS(generate(w, 10, 0.0, 4), std::invalid_argument);
  CHECK_THROWS_AS(generate(w, 10, 1.5, 4), std::invalid_argument);
  CHECK_THROWS_AS(generate(w, 0, 0.5, 4), std::invalid_argument);
  const Dataset full = generate(w, 10, 1.0, 4);
  CHECK(full.label_ratio() == 1.0);
}

TEST_CASE("pair content is a pure function of the seed, not the fraction") {
  const WorldSpec w = WorldSpec::four_modes();
  const Dataset a = generate(w, 60, 0.25, 5);
  const Dataset b = generate(w, 60, 1.0, 5);

  std::vector<const PreferenceTriplet*> by_id_a(60), by_id_b(60);
  for (const auto& y : a.labeled) by_id_a[y.id] = &y;
  for (const auto& y : a.unlabeled) by_id_a[y.id] = &y;
  for (const auto& y : b.labeled) by_id_b[y.id] = &y;
  for (int i = 0; i < 60; ++i) {
    REQUIRE(by_id_a[i] != nullptr);
    REQUIRE(by_id_b[i] != nullptr);
    CHECK(by_id_a[i]->c == by_id_b[i]->c);
    CHECK(by_id_a[i]->x0 == by_id_b[i]->x0);
    CHECK(by_id_a[i]->x1 == by_id_b[i]->x1);
    if (by_id_a[i]->labeled()) CHECK(*by_id_a[i]->z == *by_id_b[i]->z);
  }
}

TEST_CASE("id_base shifts ids without changing content") {
  const WorldSpec w = WorldSpec::four_modes();
  const Dataset a = generate(w, 30, 0.5, 6);
  const Dataset b = generate(w, 30, 0.5, 6, 1000);
  REQUIRE(a.n_l() == b.n_l());
  for (int i = 0; i < a.n_l(); ++i) {
    CHECK(b.labeled[i].id == a.labeled[i].id + 1000);
    CHECK(b.labeled[i].x0 == a.labeled[i].x0);
    CHECK(*b.labeled[i].z == *a.labeled[i].z);
  }
  for (int i = 0; i < a.n_u(); ++i)
    CHECK(b.unlabeled[i].id == a.unlabeled[i].id + 1000);
}

TEST_CASE("conditions are uniform and the labeled subset is unbiased") {
  const WorldSpec w = WorldSpec::four_modes();

  // Chi-square over condition counts on one large draw; df = 3, the 99.9th
  // percentile is 16.27.
  const Dataset big = generate(w, 8000, 1.0, 7);
  std::array<int, 4> counts{};
  for (const auto& y : big.labeled) ++counts[y.c];
  double chi2 = 0.0;
  for (int c = 0; c < 4; ++c) {
    const double diff = counts[c] - 2000.0;
    chi2 += diff * diff / 2000.0;
  }
  CHECK(chi2 < 16.27);

  // Inclusion frequency of a fixed pair id across 200 independent labelings
  // is Binomial(200, 0.25); allow 4 standard deviations.
  int included = 0;
  for (int seed = 0; seed < 200; ++seed) {
    const Dataset d = generate(w, 40, 0.25, 1000 + seed);
    for (const auto& y : d.labeled)
      if (y.id == 17) ++included;
  }
  const double sd = std::sqrt(200 * 0.25 * 0.75);
  CHECK(std::abs(included - 50.0) <= 4.0 * sd);
}

TEST_CASE("distinct seeds give distinct pairs") {
  const WorldSpec w = WorldSpec::four_modes();
  const Dataset a = generate(w, 5, 1.0, 8);
  const Dataset b = generate(w, 5, 1.0, 9);
  bool same = true;
  for (int i = 0; i < 5; ++i)
    same = same && a.labeled[i].x0 == b.labeled[i].x0;
  CHECK_FALSE(same);
}

TEST_CASE("mixture draws cluster near the mode centers") {
  const WorldSpec w = WorldSpec::four_modes();
  RngStream rng = RngStream::root(10);
  int near = 0;
  const int n = 2000;
  for (int i = 0; i < n; ++i) {
    const Vec x = draw_mixture(w, rng);
    double best = 1e300;
    for (int m = 0; m < 4; ++m)
      best = std::min(best,
                      (x - Vec(w.mode_centers.row(m).transpose())).norm());
    if (best < 3 * w.mode_sigma) ++near;
  }
  // P(chi(2) < 3 sigma) ~ 0.989.
  CHECK(near > 0.96 * n);
}

TEST_CASE("label ratio requires labeled data") {
  Dataset d;
  d.unlabeled.push_back(make_triplet(0, 0, vec2(0, 0), vec2(1, 1)));
  CHECK_THROWS_AS(d.label_ratio(), std::runtime_error);
}
