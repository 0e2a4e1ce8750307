#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "model.hpp"

namespace llmfrac {

// Per-unit scores with the pieces the mixture likelihood needs. Units
// with empty token sets are excluded here and counted in n_skipped.
// ratio_em1 caches expm1(log_ratio): the mixture term for one unit is
// log((1-a) + a*e^r) = log1p(a * expm1(r)), one multiply and one log1p
// per likelihood evaluation.
struct ScoredUnits {
  std::vector<double> log_p;
  std::vector<double> log_ratio;
  std::vector<double> ratio_em1;
  std::vector<std::uint32_t> record_index; // parallel to log_p when available
  std::size_t n_skipped = 0;

  std::size_t size() const { return log_ratio.size(); }
};

ScoredUnits score_units(const OccurrenceModel& model, const Units& units);

struct MixtureEstimate {
  double alpha = 0;
  double loglik = 0;
  std::int64_t n = 0;
  std::optional<double> ci_low;
  std::optional<double> ci_high;
  std::int64_t n_skipped = 0;
};

// Sum over units of log((1-alpha) + alpha * e^{log_ratio}); the full
// log-likelihood minus its alpha-independent part.
double mixture_gain(std::span<const double> ratio_em1, std::span<const double> log_ratio,
                    double alpha);

// Full mixture log-likelihood at alpha. Throws on empty input or
// alpha outside [0, 1].
double log_likelihood(const ScoredUnits& scored, double alpha);

// MLE over alpha in [0, 1]. The per-unit terms are concave in alpha
// (log of an affine function) and sums preserve concavity, so
// golden-section search finds the maximizer; boundary values are
// checked explicitly. Absolute tolerance on alpha.
constexpr double kAlphaTolerance = 1e-6;
MixtureEstimate estimate_alpha(const ScoredUnits& scored);

// Percentile bootstrap over units: B resamples with replacement, one
// estimate per resample, 2.5th/97.5th percentiles. Replicate b draws
// from derive_seed(seed, b), so parallel and serial runs agree.
std::pair<double, double> bootstrap_ci(const ScoredUnits& scored, int B, std::uint64_t seed);

// estimate_alpha + bootstrap_ci in one call (B = 0 skips the interval).
MixtureEstimate estimate_with_ci(const OccurrenceModel& model, const Units& units, int B,
                                 std::uint64_t seed);

} // namespace llmfrac
