#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "estimator.hpp"

namespace llmfrac {

// Calibration harness: construct mixtures with known ground-truth alpha
// from held-out pools, estimate, and report per-point error.

struct ValidationPoint {
  double alpha_true = 0;
  double alpha_est = 0;
  std::optional<double> ci_low;
  std::optional<double> ci_high;
  std::int64_t n = 0;
  bool ok = false;
  std::string error;
};

struct ValidationReport {
  std::vector<ValidationPoint> points; // sorted by alpha_true
  double max_abs_error = 0;            // over successful points
  std::uint64_t seed = 0;
  bool manifest_checked = false; // model carried a training-id manifest
};

// Exactly floor(alpha*n) LLM sentences plus n - floor(alpha*n) human
// sentences, drawn without replacement and shuffled. Only sentences with
// non-empty token sets are drawn, so the ground truth is exact.
std::vector<SentenceRecord> make_mixture(std::span<const SentenceRecord> human_heldout,
                                         std::span<const SentenceRecord> llm_heldout,
                                         double alpha, std::size_t n, std::uint64_t seed);

// One estimate (with bootstrap CI when B > 0) per requested alpha.
// If the model records a training-id manifest, any held-out sentence
// whose parent id appears in it is a split violation and an error;
// without a manifest the check is skipped and reported as such.
ValidationReport run_sweep(const OccurrenceModel& model,
                           std::span<const SentenceRecord> human_heldout,
                           std::span<const SentenceRecord> llm_heldout,
                           std::span<const double> alphas, std::size_t n, int bootstrap_b,
                           std::uint64_t seed);

} // namespace llmfrac
