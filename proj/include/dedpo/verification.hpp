#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dedpo/io.hpp"
#include "dedpo/linear_model.hpp"
#include "dedpo/trainer.hpp"

namespace dedpo {

struct VerificationResult {
  std::string check;
  bool passed = false;
  double statistic = 0.0;
  double tolerance = 0.0;
  Json detail;
};

// The three-term debiased loss and its combined-target form are the same
// number up to roundoff.  Evaluates randomized instances spanning beta in
// [0.01, 10] and correction ratios up to max_ratio; statistic is the worst
// relative discrepancy.
VerificationResult check_loss_form_identity(int instances, std::uint64_t seed,
                                            double max_ratio = 1e4,
                                            double tolerance = 1e-10);

// Resamples which pairs of a fully labeled pool count as labeled and
// compares each estimator's mean against the full-label mean in standard
// errors.  The debiased estimator must sit within the tolerance at every
// annotator accuracy; pooled imputation must fail at accuracy 0.5 and pass
// at accuracy 1.0.
VerificationResult check_unbiasedness(int pool_size, int labeled_per_split,
                                      int resamples, std::uint64_t seed,
                                      double tolerance_se = 3.0);

// Curvature of the per-sample objective in the logit: the second derivative
// is sigmoid'(m) independent of the target, so over logits in [-M, M] it is
// bounded below by sigmoid(M)(1 - sigmoid(M)).  Verified by central second
// differences against the analytic floor, including exactness of 1/4 at 0.
VerificationResult check_curvature(double M = 4.0);

// Margins of a trained policy stay within the band the curvature bound
// assumes.  Self-contained: pretrains, trains briefly, then measures the
// largest absolute margin over a fresh dataset.
VerificationResult check_bounded_margins(std::uint64_t seed, double M = 6.0);

// Parameter-error decay in the linear world: the debiased estimator's error
// falls near 1/n with a perfect annotator, and its response to annotator
// error eps is flat-then-quartic while pooled imputation degrades already at
// first order.
VerificationResult check_rate(const RateStudyConfig& cfg, std::uint64_t seed);

const std::vector<std::string>& all_check_names();

// Runs the named checks (all when the list is empty) with per-check seeds
// derived from seed.  Unknown names throw std::invalid_argument.
std::vector<VerificationResult> run_checks(std::span<const std::string> names,
                                           std::uint64_t seed);

Json verification_json(const VerificationResult& r);

// One line per check: check,passed,statistic,tolerance.
void write_check_summary_csv(const std::string& path,
                             std::span<const VerificationResult> results);

// Conditions the guarantees lean on that no finite run can certify; callers
// surface these verbatim in verification summaries.
const std::vector<std::string>& assumed_only_conditions();

}  // namespace dedpo
