#include "estimator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

#include "errors.hpp"
#include "parallel.hpp"
#include "rng.hpp"

namespace llmfrac {

namespace {

constexpr std::size_t kScoreChunk = 4096;
constexpr double kIdentifiabilityEps = 1e-12;

inline double mix_term(double em1, double r, double alpha) {
  if (alpha <= 0.0) return 0.0;
  if (alpha >= 1.0) return r;
  if (std::isinf(em1)) {
    // e^r overflows a double; factor it out.
    return r + std::log(alpha + (1.0 - alpha) * std::exp(-r));
  }
  return std::log1p(alpha * em1);
}

// Deterministic chunked reduction: per-chunk partial sums combined in
// chunk order, so the result does not depend on the worker count.
template <typename TermFn>
double chunked_sum(std::size_t n, TermFn&& term) {
  const std::size_t chunks = chunk_count(n, kScoreChunk);
  if (chunks <= 1) {
    double acc = 0;
    for (std::size_t i = 0; i < n; ++i) acc += term(i);
    return acc;
  }
  std::vector<double> partial(chunks, 0.0);
  parallel_chunks(n, kScoreChunk, [&](std::size_t c, std::size_t b, std::size_t e) {
    double acc = 0;
    for (std::size_t i = b; i < e; ++i) acc += term(i);
    partial[c] = acc;
  });
  double acc = 0;
  for (double v : partial) acc += v;
  return acc;
}

struct GainEvaluator {
  std::span<const double> em1;
  std::span<const double> ratio;

  double operator()(double alpha) const {
    return chunked_sum(em1.size(), [&](std::size_t i) { return mix_term(em1[i], ratio[i], alpha); });
  }
};

// Golden-section maximization of a concave function on [0, 1] to the
// given absolute tolerance, then compared against both boundaries.
template <typename Fn>
double maximize_unimodal(Fn&& g, double tol) {
  constexpr double invphi = 0.6180339887498948482;
  double a = 0.0, b = 1.0;
  double c = b - invphi * (b - a);
  double d = a + invphi * (b - a);
  double fc = g(c);
  double fd = g(d);
  while (b - a > tol) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - invphi * (b - a);
      fc = g(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + invphi * (b - a);
      fd = g(d);
    }
  }
  double best_x = 0.5 * (a + b);
  double best_f = g(best_x);
  const double f0 = g(0.0);
  const double f1 = g(1.0);
  if (f1 > best_f) {
    best_f = f1;
    best_x = 1.0;
  }
  if (f0 >= best_f) { // ties resolve to the smaller alpha
    best_f = f0;
    best_x = 0.0;
  }
  return best_x;
}

bool identifiable(std::span<const double> ratio) {
  for (double r : ratio) {
    if (std::fabs(r) > kIdentifiabilityEps) return true;
  }
  return false;
}

} // namespace

ScoredUnits score_units(const OccurrenceModel& model, const Units& units) {
  const Scorer scorer(model);
  const std::size_t n = units.size();
  const bool with_records = units.record_index.size() == n;

  // Score into per-position slots, then compact, so parallel chunking
  // preserves unit order exactly.
  std::vector<SentenceScore> slots(n);
  std::vector<unsigned char> used(n, 0);
  parallel_chunks(n, kScoreChunk, [&](std::size_t, std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      const TokenSet& tokens = *units.view[i];
      if (tokens.empty()) continue;
      slots[i] = scorer.score(tokens);
      used[i] = 1;
    }
  });

  ScoredUnits out;
  out.log_p.reserve(n);
  out.log_ratio.reserve(n);
  out.ratio_em1.reserve(n);
  if (with_records) out.record_index.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!used[i]) {
      ++out.n_skipped;
      continue;
    }
    out.log_p.push_back(slots[i].log_p);
    out.log_ratio.push_back(slots[i].log_ratio);
    out.ratio_em1.push_back(std::expm1(slots[i].log_ratio));
    if (with_records) out.record_index.push_back(units.record_index[i]);
  }
  return out;
}

double mixture_gain(std::span<const double> ratio_em1, std::span<const double> log_ratio,
                    double alpha) {
  return GainEvaluator{ratio_em1, log_ratio}(alpha);
}

double log_likelihood(const ScoredUnits& scored, double alpha) {
  if (scored.size() == 0) throw DataError("log_likelihood: no scoreable units");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw UsageError("alpha must lie in [0, 1]");
  const double base = chunked_sum(scored.size(), [&](std::size_t i) { return scored.log_p[i]; });
  return base + mixture_gain(scored.ratio_em1, scored.log_ratio, alpha);
}

MixtureEstimate estimate_alpha(const ScoredUnits& scored) {
  if (scored.size() == 0)
    throw DataError("estimate: corpus has no units with a non-empty token set");
  if (!identifiable(scored.log_ratio))
    throw DataError("alpha unidentifiable: P and Q indistinguishable on this vocabulary");

  const GainEvaluator gain{scored.ratio_em1, scored.log_ratio};
  MixtureEstimate est;
  est.alpha = maximize_unimodal(gain, kAlphaTolerance);
  est.loglik = log_likelihood(scored, est.alpha);
  est.n = static_cast<std::int64_t>(scored.size());
  est.n_skipped = static_cast<std::int64_t>(scored.n_skipped);
  return est;
}

namespace {

double percentile(std::vector<double> sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  const double frac = pos - static_cast<double>(lo);
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac;
}

} // namespace

std::pair<double, double> bootstrap_ci(const ScoredUnits& scored, int B, std::uint64_t seed) {
  if (B < 100) throw UsageError("bootstrap: B must be >= 100");
  const std::size_t n = scored.size();
  if (n == 0) throw DataError("bootstrap: no scoreable units");
  if (!identifiable(scored.log_ratio))
    throw DataError("alpha unidentifiable: P and Q indistinguishable on this vocabulary");

  std::vector<double> alphas(static_cast<std::size_t>(B));
  std::atomic<bool> failed{false};
  parallel_chunks(static_cast<std::size_t>(B), 8, [&](std::size_t, std::size_t b, std::size_t e) {
    std::vector<double> em1(n), ratio(n);
    for (std::size_t rep = b; rep < e; ++rep) {
      if (failed.load(std::memory_order_relaxed)) return;
      Rng rng(derive_seed(seed, rep));
      bool ok = false;
      for (int attempt = 0; attempt < 10 && !ok; ++attempt) {
        for (std::size_t i = 0; i < n; ++i) {
          const std::size_t j = static_cast<std::size_t>(rng.bounded(n));
          em1[i] = scored.ratio_em1[j];
          ratio[i] = scored.log_ratio[j];
        }
        ok = identifiable(ratio); // degenerate resamples are redrawn
      }
      if (!ok) {
        failed.store(true, std::memory_order_relaxed);
        return;
      }
      // Replicates already run in parallel; keep the inner search serial.
      auto g = [&](double alpha) {
        double acc = 0;
        for (std::size_t i = 0; i < n; ++i) acc += mix_term(em1[i], ratio[i], alpha);
        return acc;
      };
      alphas[rep] = maximize_unimodal(g, kAlphaTolerance);
    }
  });
  if (failed.load())
    throw DataError("bootstrap: resamples degenerate after 10 retries");

  std::sort(alphas.begin(), alphas.end());
  return {percentile(alphas, 0.025), percentile(alphas, 0.975)};
}

MixtureEstimate estimate_with_ci(const OccurrenceModel& model, const Units& units, int B,
                                 std::uint64_t seed) {
  const ScoredUnits scored = score_units(model, units);
  MixtureEstimate est = estimate_alpha(scored);
  if (B > 0) {
    auto [lo, hi] = bootstrap_ci(scored, B, seed);
    // The percentile interval is widened, if needed, to honor
    // ci_low <= alpha <= ci_high.
    est.ci_low = std::min(lo, est.alpha);
    est.ci_high = std::max(hi, est.alpha);
  }
  return est;
}

} // namespace llmfrac
