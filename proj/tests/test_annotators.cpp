#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <unordered_map>
#include <vector>

#include "dedpo/annotators.hpp"
#include "dedpo/world.hpp"

using namespace dedpo;

namespace {

Vec vec2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

}  // namespace

TEST_CASE("oracle matches the true preference rule") {
  const WorldSpec w = WorldSpec::four_modes();
  const auto oracle = make_oracle_annotator(w);
  CHECK(oracle->name() == "oracle");
  CHECK_FALSE(oracle->depends_on_policy());
  const Dataset d = generate(w, 100, 1.0, 9);
  for (const auto& y : d.labeled) {
    const double g = oracle->annotate(y);
    CHECK(g == double(*y.z));
    CHECK(g == double(true_preference(w, y.c, y.x0, y.x1)));
  }
}

TEST_CASE("flip annotator: frozen coins, correct flip rate") {
  const WorldSpec w = WorldSpec::four_modes();
  const Dataset d = generate(w, 4000, 1.0, 10);
  const auto flip = make_flip_annotator(w, 0.2, 77);
  const auto oracle = make_oracle_annotator(w);

  int flips = 0;
  for (const auto& y : d.labeled) {
    const double a = flip->annotate(y);
    CHECK((a == 0.0 || a == 1.0));
    CHECK(a == flip->annotate(y));  // frozen per id
    if (a != oracle->annotate(y)) ++flips;
  }
  // Binomial(4000, 0.2): allow 4 standard deviations around 800.
  const double sd = std::sqrt(4000 * 0.2 * 0.8);
  CHECK(std::abs(flips - 800.0) <= 4.0 * sd);

  const auto flip0 = make_flip_annotator(w, 0.0, 77);
  for (const auto& y : d.labeled)
    CHECK(flip0->annotate(y) == oracle->annotate(y));
  CHECK_THROWS_AS(make_flip_annotator(w, -0.1, 1), std::invalid_argument);
  CHECK_THROWS_AS(make_flip_annotator(w, 1.1, 1), std::invalid_argument);
}

TEST_CASE("biased annotator: soft scores driven by signal and anchor pull") {
  const WorldSpec w = WorldSpec::four_modes();
  const Dataset d = generate(w, 500, 1.0, 11);

  // Zero bias, huge signal: rounds to the truth on every pair.
  const auto sharp = make_biased_annotator(w, 64.0, 0.0);
  const auto report = evaluate_annotator(*sharp, d.labeled);
  CHECK(report.agreement > 0.95);
  CHECK(report.n == 500);

  // Zero signal: the score depends only on which side sits nearer the anchor.
  const auto pull = make_biased_annotator(w, 0.0, 1.0);
  const PreferenceTriplet near_far =
      make_triplet(0, 0, vec2(-2, -2), vec2(2, 2));  // x1 at the anchor
  const PreferenceTriplet far_near =
      make_triplet(1, 0, vec2(2, 2), vec2(-2, -2));
  CHECK(pull->annotate(near_far) > 0.5);
  CHECK(pull->annotate(far_near) < 0.5);
  CHECK(pull->annotate(near_far) ==
        doctest::Approx(1.0 - pull->annotate(far_near)).epsilon(1e-12));

  for (const auto& y : d.labeled) {
    const double g = pull->annotate(y);
    CHECK(g >= 0.0);
    CHECK(g <= 1.0);
  }
}

TEST_CASE("biased annotator calibration hits the target agreement") {
  const WorldSpec w = WorldSpec::four_modes();
  const Dataset calib = generate(w, 2000, 1.0, 12);
  for (double target : {0.7, 0.8, 0.95}) {
    const CalibratedAnnotator cal =
        calibrate_biased_annotator(w, target, 1.0, calib.labeled);
    CHECK(std::abs(cal.achieved_agreement - target) <= 0.02);
    CHECK(cal.signal_scale >= 0.0);
    CHECK(cal.signal_scale <= 64.0);
    CHECK(cal.annotator->calibration_ids().size() == 2000);
    const auto report = evaluate_annotator(*cal.annotator, calib.labeled);
    CHECK(report.agreement == doctest::Approx(cal.achieved_agreement));
  }
  CHECK_THROWS_AS(calibrate_biased_annotator(w, 0.5, 1.0, calib.labeled),
                  std::invalid_argument);
  CHECK_THROWS_AS(calibrate_biased_annotator(w, 1.2, 1.0, calib.labeled),
                  std::invalid_argument);
  const Dataset partial = generate(w, 50, 0.5, 13);
  CHECK_THROWS_AS(
      calibrate_biased_annotator(w, 0.8, 1.0, partial.unlabeled),
      std::invalid_argument);
}

TEST_CASE("fixed annotator: table lookups, unknown ids throw") {
  std::unordered_map<std::int64_t, double> table{{5, 0.25}, {9, 1.0}};
  const auto fixed = make_fixed_annotator(std::move(table));
  const PreferenceTriplet y5 = make_triplet(5, 0, vec2(0, 0), vec2(1, 1));
  const PreferenceTriplet y9 = make_triplet(9, 1, vec2(0, 0), vec2(1, 1));
  const PreferenceTriplet y7 = make_triplet(7, 2, vec2(0, 0), vec2(1, 1));
  CHECK(fixed->annotate(y5) == 0.25);
  CHECK(fixed->annotate(y9) == 1.0);
  CHECK_THROWS_AS(fixed->annotate(y7), std::out_of_range);
  CHECK_THROWS_AS(
      make_fixed_annotator({{1, 1.5}}), std::invalid_argument);
  CHECK_THROWS_AS(
      make_fixed_annotator({{1, -0.5}}), std::invalid_argument);
}

TEST_CASE("annotator report confusion counts are consistent") {
  const WorldSpec w = WorldSpec::four_modes();
  const Dataset d = generate(w, 300, 1.0, 14);
  const auto flip = make_flip_annotator(w, 0.3, 5);
  const auto report = evaluate_annotator(*flip, d.labeled);
  const auto& cm = report.confusion;
  CHECK(cm[0][0] + cm[0][1] + cm[1][0] + cm[1][1] == 300);
  CHECK(report.agreement ==
        doctest::Approx((cm[0][0] + cm[1][1]) / 300.0).epsilon(1e-15));
  CHECK_THROWS_AS(evaluate_annotator(*flip, std::vector<PreferenceTriplet>{}),
                  std::invalid_argument);
  const Dataset part = generate(w, 10, 0.5, 15);
  CHECK_THROWS_AS(evaluate_annotator(*flip, part.unlabeled),
                  std::invalid_argument);
}

TEST_CASE("self-training gates close exactly when the snapshot is the ref") {
  const WorldSpec w = WorldSpec::four_modes();
  const NoiseSchedule sched = make_schedule(10, ScheduleKind::linear);
  DenoiserSpec spec;
  const ToyDenoiser ref = ToyDenoiser::random_init(spec, RngStream::root(20));
  const Dataset d = generate(w, 40, 0.5, 21);

  for (SelfTrainAugment aug :
       {SelfTrainAugment::none, SelfTrainAugment::three_timesteps}) {
    for (double tau : {0.51, 0.7, 0.95, 1.0}) {
      const SelfTrainingAnnotator st(ref, sched, 1.0, tau, aug, 99);
      CHECK(st.depends_on_policy());
      for (const auto& y : d.unlabeled) {
        const MarginDraw dr = margin_draw_for(7, 0, y.id, 2, sched);
        const GatedLabel gl = st.gated_label(y, dr);
        CHECK(gl.weight == 0.0);
        CHECK(st.annotate(y) == 0.5);
      }
    }
  }
}

TEST_CASE("self-training opens gates once the snapshot moves") {
  const WorldSpec w = WorldSpec::four_modes();
  const NoiseSchedule sched = make_schedule(10, ScheduleKind::linear);
  DenoiserSpec spec;
  const ToyDenoiser ref = ToyDenoiser::random_init(spec, RngStream::root(22));
  const ToyDenoiser other = ToyDenoiser::random_init(spec, RngStream::root(23));
  const Dataset d = generate(w, 60, 0.5, 24);

  SelfTrainingAnnotator st(ref, sched, 1.0, 0.51, SelfTrainAugment::none, 5);
  st.snapshot(other);
  int open = 0;
  for (const auto& y : d.unlabeled) {
    const MarginDraw dr = margin_draw_for(7, 0, y.id, 2, sched);
    const GatedLabel gl = st.gated_label(y, dr);
    CHECK((gl.weight == 0.0 || gl.weight == 1.0));
    if (gl.weight == 1.0) {
      ++open;
      CHECK((gl.label == 0.0 || gl.label == 1.0));
    }
  }
  CHECK(open > 0);
}

TEST_CASE("self-training gate respects the confidence threshold") {
  // With tau = 1 the gate needs |G - 0.5| >= 0.5, i.e. a fully saturated
  // score; random parameters give interior scores, so all gates stay shut.
  const WorldSpec w = WorldSpec::four_modes();
  const NoiseSchedule sched = make_schedule(10, ScheduleKind::linear);
  DenoiserSpec spec;
  const ToyDenoiser ref = ToyDenoiser::random_init(spec, RngStream::root(25));
  const ToyDenoiser other = ToyDenoiser::random_init(spec, RngStream::root(26));
  const Dataset d = generate(w, 40, 0.5, 27);
  SelfTrainingAnnotator st(ref, sched, 1.0, 1.0, SelfTrainAugment::none, 5);
  st.snapshot(other);
  for (const auto& y : d.unlabeled) {
    const MarginDraw dr = margin_draw_for(7, 0, y.id, 2, sched);
    CHECK(st.gated_label(y, dr).weight == 0.0);
  }
}

TEST_CASE("self-training rejects tau outside (0.5, 1]") {
  const NoiseSchedule sched = make_schedule(10, ScheduleKind::linear);
  DenoiserSpec spec;
  const ToyDenoiser ref = ToyDenoiser::random_init(spec, RngStream::root(28));
  CHECK_THROWS_AS(
      SelfTrainingAnnotator(ref, sched, 1.0, 0.5, SelfTrainAugment::none, 1),
      std::invalid_argument);
  CHECK_THROWS_AS(
      SelfTrainingAnnotator(ref, sched, 1.0, 1.01, SelfTrainAugment::none, 1),
      std::invalid_argument);
}

TEST_CASE("timestep augmentation averages three scores") {
  const WorldSpec w = WorldSpec::four_modes();
  const NoiseSchedule sched = make_schedule(10, ScheduleKind::linear);
  DenoiserSpec spec;
  const ToyDenoiser ref = ToyDenoiser::random_init(spec, RngStream::root(29));
  const ToyDenoiser other = ToyDenoiser::random_init(spec, RngStream::root(30));
  const Dataset d = generate(w, 30, 0.5, 31);

  SelfTrainingAnnotator plain(ref, sched, 1.0, 0.51, SelfTrainAugment::none, 5);
  SelfTrainingAnnotator avg(ref, sched, 1.0, 0.51,
                            SelfTrainAugment::three_timesteps, 5);
  plain.snapshot(other);
  avg.snapshot(other);
  bool differs = false;
  for (const auto& y : d.unlabeled) {
    const MarginDraw dr = margin_draw_for(7, 0, y.id, 2, sched);
    const GatedLabel a = plain.gated_label(y, dr);
    const GatedLabel b = avg.gated_label(y, dr);
    // Determinism: same inputs, same outputs.
    const GatedLabel b2 = avg.gated_label(y, dr);
    CHECK(b.label == b2.label);
    CHECK(b.weight == b2.weight);
    if (a.label != b.label || a.weight != b.weight) differs = true;
  }
  CHECK(differs);
}

TEST_CASE("augment names parse") {
  CHECK(parse_self_train_augment("none") == SelfTrainAugment::none);
  CHECK(parse_self_train_augment("three_timesteps") ==
        SelfTrainAugment::three_timesteps);
  CHECK_THROWS_AS(parse_self_train_augment("flips"), std::invalid_argument);
}
