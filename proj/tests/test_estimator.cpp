#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "errors.hpp"
#include "estimator.hpp"
#include "parallel.hpp"
#include "rng.hpp"

using namespace llmfrac;

namespace {

// Synthetic models are built straight from counts: with smoothing 1 and
// n = 8, occ = 8 gives p = 0.9 and occ = 0 gives p = 0.1, exactly.
OccurrenceModel synthetic_model(const std::vector<std::int64_t>& occ_p,
                                const std::vector<std::int64_t>& occ_q, std::int64_t n) {
  OccurrenceModel m;
  for (std::size_t i = 0; i < occ_p.size(); ++i) m.vocabulary.tokens.push_back("tk" + std::to_string(i));
  std::sort(m.vocabulary.tokens.begin(), m.vocabulary.tokens.end());
  m.vocabulary.min_df = 1;
  m.n_p = n;
  m.n_q = n;
  m.occ_p = occ_p;
  m.occ_q = occ_q;
  m.smoothing = 1.0;
  return m;
}

std::vector<SentenceRecord> sample_from(const OccurrenceModel& m, bool llm_side, std::size_t n,
                                        Rng& rng) {
  std::vector<SentenceRecord> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t t = 0; t < m.vocabulary.size(); ++t) {
      const double prob = llm_side ? m.q(t) : m.p(t);
      if (rng.bernoulli(prob)) out[i].tokens.push_back(m.vocabulary.tokens[t]);
    }
  }
  return out;
}

std::vector<SentenceRecord> sample_mixture(const OccurrenceModel& m, double alpha, std::size_t n,
                                           Rng& rng) {
  std::vector<SentenceRecord> out;
  const std::size_t k = static_cast<std::size_t>(alpha * static_cast<double>(n));
  auto llm = sample_from(m, true, k, rng);
  auto human = sample_from(m, false, n - k, rng);
  out.insert(out.end(), llm.begin(), llm.end());
  out.insert(out.end(), human.begin(), human.end());
  rng.shuffle(out);
  return out;
}

// Independent oracle: direct full-vocabulary long double evaluation of
// the mixture log-likelihood (no baseline+delta decomposition, no
// expm1 caching).
long double oracle_loglik(const OccurrenceModel& m, std::span<const SentenceRecord> corpus,
                          long double alpha) {
  long double total = 0;
  for (const auto& s : corpus) {
    if (s.tokens.empty()) continue;
    long double lp = 0, lq = 0;
    for (std::size_t t = 0; t < m.vocabulary.size(); ++t) {
      const bool present =
          std::binary_search(s.tokens.begin(), s.tokens.end(), m.vocabulary.tokens[t]);
      lp += present ? logl((long double)m.p(t)) : logl(1.0L - (long double)m.p(t));
      lq += present ? logl((long double)m.q(t)) : logl(1.0L - (long double)m.q(t));
    }
    total += lp + logl((1.0L - alpha) + alpha * expl(lq - lp));
  }
  return total;
}

// Independent oracle: exhaustive grid maximization at 1e-4 resolution.
// Per-sentence scores come from direct full-vocabulary summation and are
// cached once; they do not depend on alpha.
double oracle_grid_alpha(const OccurrenceModel& m, std::span<const SentenceRecord> corpus) {
  std::vector<long double> e_ratio;
  for (const auto& s : corpus) {
    if (s.tokens.empty()) continue;
    long double lp = 0, lq = 0;
    for (std::size_t t = 0; t < m.vocabulary.size(); ++t) {
      const bool present =
          std::binary_search(s.tokens.begin(), s.tokens.end(), m.vocabulary.tokens[t]);
      lp += present ? logl((long double)m.p(t)) : logl(1.0L - (long double)m.p(t));
      lq += present ? logl((long double)m.q(t)) : logl(1.0L - (long double)m.q(t));
    }
    e_ratio.push_back(expl(lq - lp));
  }
  double best_alpha = 0;
  long double best = -1e4000L;
  for (int i = 0; i <= 10000; ++i) {
    const long double a = static_cast<long double>(i) / 10000.0L;
    long double ll = 0; // the alpha-independent sum of lp is dropped
    for (const long double er : e_ratio) ll += logl((1.0L - a) + a * er);
    if (ll > best) {
      best = ll;
      best_alpha = static_cast<double>(a);
    }
  }
  return best_alpha;
}

ScoredUnits score_corpus(const OccurrenceModel& m, const std::vector<SentenceRecord>& corpus) {
  return score_units(m, make_units(std::span<const SentenceRecord>(corpus)));
}

OccurrenceModel random_model(Rng& rng, std::size_t m_tokens) {
  std::vector<std::int64_t> occ_p(m_tokens), occ_q(m_tokens);
  const std::int64_t n = 50;
  for (std::size_t t = 0; t < m_tokens; ++t) {
    occ_p[t] = static_cast<std::int64_t>(rng.bounded(n + 1));
    occ_q[t] = static_cast<std::int64_t>(rng.bounded(n + 1));
  }
  return synthetic_model(occ_p, occ_q, n);
}

} // namespace

TEST_CASE("log_likelihood collapses at the boundaries") {
  Rng rng(3);
  const OccurrenceModel m = synthetic_model({8, 0, 4}, {0, 8, 4}, 8);
  const auto corpus = sample_mixture(m, 0.3, 200, rng);
  const ScoredUnits scored = score_corpus(m, corpus);

  double sum_lp = 0, sum_lq = 0;
  for (std::size_t i = 0; i < scored.size(); ++i) {
    sum_lp += scored.log_p[i];
    sum_lq += scored.log_p[i] + scored.log_ratio[i];
  }
  CHECK(log_likelihood(scored, 0.0) == doctest::Approx(sum_lp).epsilon(1e-12));
  CHECK(log_likelihood(scored, 1.0) == doctest::Approx(sum_lq).epsilon(1e-12));
}

TEST_CASE("log_likelihood matches the high-precision oracle at alpha=0.3") {
  Rng rng(19);
  const OccurrenceModel m = random_model(rng, 12);
  const auto corpus = sample_mixture(m, 0.4, 300, rng);
  const ScoredUnits scored = score_corpus(m, corpus);
  const long double oracle = oracle_loglik(m, corpus, 0.3L);
  CHECK(log_likelihood(scored, 0.3) ==
        doctest::Approx(static_cast<double>(oracle)).epsilon(1e-10));
}

TEST_CASE("log_likelihood rejects bad input") {
  const OccurrenceModel m = synthetic_model({8}, {0}, 8);
  ScoredUnits empty;
  CHECK_THROWS_AS(log_likelihood(empty, 0.5), DataError);
  Rng rng(1);
  const auto corpus = sample_mixture(m, 0.0, 10, rng);
  const ScoredUnits scored = score_corpus(m, corpus);
  CHECK_THROWS_AS(log_likelihood(scored, 1.5), UsageError);
  CHECK_THROWS_AS(log_likelihood(scored, -0.1), UsageError);
}

TEST_CASE("estimate matches exhaustive grid search on the two-token instance") {
  // p=(0.9,0.1), q=(0.1,0.9), 1000 sentences at true alpha 0.20, seed 7
  const OccurrenceModel m = synthetic_model({8, 0}, {0, 8}, 8);
  Rng rng(7);
  const auto corpus = sample_mixture(m, 0.20, 1000, rng);
  const ScoredUnits scored = score_corpus(m, corpus);
  const MixtureEstimate est = estimate_alpha(scored);
  const double grid = oracle_grid_alpha(m, corpus);
  CHECK(std::fabs(est.alpha - grid) <= 2e-4);
  CHECK(est.alpha == doctest::Approx(0.20).epsilon(0.25)); // sanity: near truth
  CHECK(est.loglik >= log_likelihood(scored, 0.0));
  CHECK(est.loglik >= log_likelihood(scored, 1.0));
}

TEST_CASE("optimizer equals grid oracle across random instances") {
  Rng rng(29);
  for (int trial = 0; trial < 20; ++trial) {
    const OccurrenceModel m = random_model(rng, 8 + rng.bounded(20));
    const double truth = rng.real();
    const auto corpus = sample_mixture(m, truth, 150 + rng.bounded(150), rng);
    const ScoredUnits scored = score_corpus(m, corpus);
    bool flat = true;
    for (double r : scored.log_ratio) flat = flat && std::fabs(r) <= 1e-12;
    if (flat) continue;
    const MixtureEstimate est = estimate_alpha(scored);
    CHECK(std::fabs(est.alpha - oracle_grid_alpha(m, corpus)) <= 2e-4);
  }
}

TEST_CASE("strongly negative ratios drive the estimate to zero") {
  const OccurrenceModel m = synthetic_model({8, 4}, {0, 4}, 8); // token 0: p=0.9, q=0.1
  std::vector<SentenceRecord> corpus(100);
  for (auto& s : corpus) s.tokens = {"tk0"}; // always the p-favored token
  const MixtureEstimate est = estimate_alpha(score_corpus(m, corpus));
  CHECK(est.alpha == 0.0);
}

TEST_CASE("identical p and q is unidentifiable") {
  const OccurrenceModel m = synthetic_model({6, 2}, {6, 2}, 8);
  Rng rng(5);
  const auto corpus = sample_mixture(m, 0.5, 50, rng);
  CHECK_THROWS_WITH_AS(estimate_alpha(score_corpus(m, corpus)),
                       "alpha unidentifiable: P and Q indistinguishable on this vocabulary",
                       DataError);
}

TEST_CASE("likelihood grid is concave: non-increasing successive differences") {
  Rng rng(31);
  for (int trial = 0; trial < 10; ++trial) {
    const OccurrenceModel m = random_model(rng, 10 + rng.bounded(15));
    const auto corpus = sample_mixture(m, rng.real(), 100 + rng.bounded(200), rng);
    const ScoredUnits scored = score_corpus(m, corpus);
    std::vector<double> values;
    for (int i = 0; i <= 100; ++i) values.push_back(log_likelihood(scored, i / 100.0));
    for (std::size_t i = 2; i < values.size(); ++i) {
      const double d1 = values[i - 1] - values[i - 2];
      const double d2 = values[i] - values[i - 1];
      CHECK(d2 <= d1 + 1e-9);
    }
  }
}

TEST_CASE("duplicating the corpus k times leaves the estimate unchanged") {
  Rng rng(43);
  const OccurrenceModel m = synthetic_model({8, 0, 6}, {0, 8, 2}, 8);
  const auto corpus = sample_mixture(m, 0.3, 120, rng);
  std::vector<SentenceRecord> tripled;
  for (int k = 0; k < 3; ++k) tripled.insert(tripled.end(), corpus.begin(), corpus.end());
  const double single = estimate_alpha(score_corpus(m, corpus)).alpha;
  const double triple = estimate_alpha(score_corpus(m, tripled)).alpha;
  CHECK(single == triple); // the search trajectory is scale-invariant
}

TEST_CASE("adding LLM-leaning batches never decreases the estimate") {
  const OccurrenceModel m = synthetic_model({8, 0}, {0, 8}, 8);
  Rng rng(61);
  std::vector<SentenceRecord> corpus = sample_from(m, false, 300, rng);
  double last = estimate_alpha(score_corpus(m, corpus)).alpha;
  const Scorer scorer(m);
  for (int batch = 0; batch < 5; ++batch) {
    std::vector<SentenceRecord> extra;
    while (extra.size() < 60) {
      auto s = sample_from(m, true, 1, rng)[0];
      if (scorer.score(s.tokens).log_ratio > 0) extra.push_back(std::move(s));
    }
    corpus.insert(corpus.end(), extra.begin(), extra.end());
    const double current = estimate_alpha(score_corpus(m, corpus)).alpha;
    CHECK(current >= last - 1e-9);
    last = current;
  }
}

TEST_CASE("bootstrap on identical sentences collapses to a point interval") {
  const OccurrenceModel m = synthetic_model({8, 0}, {0, 8}, 8);
  std::vector<SentenceRecord> corpus(50);
  for (auto& s : corpus) s.tokens = {"tk1"}; // q-favored: estimate pins at 1
  const ScoredUnits scored = score_corpus(m, corpus);
  const MixtureEstimate est = estimate_alpha(scored);
  const auto [lo, hi] = bootstrap_ci(scored, 200, 9);
  CHECK(lo == hi);
  CHECK(lo == est.alpha);
}

TEST_CASE("bootstrap is deterministic given the seed") {
  const OccurrenceModel m = synthetic_model({8, 0, 5}, {0, 8, 3}, 8);
  Rng rng(77);
  const auto corpus = sample_mixture(m, 0.25, 400, rng);
  const ScoredUnits scored = score_corpus(m, corpus);
  const auto a = bootstrap_ci(scored, 300, 1234);
  const auto b = bootstrap_ci(scored, 300, 1234);
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);
  const auto c = bootstrap_ci(scored, 300, 1235);
  CHECK((c.first != a.first || c.second != a.second));
}

TEST_CASE("bootstrap results are invariant to the worker-thread count") {
  const OccurrenceModel m = synthetic_model({8, 0, 5}, {0, 8, 3}, 8);
  Rng rng(78);
  const auto corpus = sample_mixture(m, 0.15, 500, rng);
  const ScoredUnits scored = score_corpus(m, corpus);
  set_worker_threads(1);
  const auto serial = bootstrap_ci(scored, 200, 42);
  const auto est_serial = estimate_alpha(scored);
  set_worker_threads(4);
  const auto parallel = bootstrap_ci(scored, 200, 42);
  const auto est_parallel = estimate_alpha(scored);
  set_worker_threads(1);
  CHECK(serial == parallel);
  CHECK(est_serial.alpha == est_parallel.alpha);
  CHECK(est_serial.loglik == est_parallel.loglik);
}

TEST_CASE("degenerate resamples are redrawn") {
  // One informative sentence among zeros: many resamples miss it and
  // must be redrawn; the interval still comes out.
  const OccurrenceModel m = synthetic_model({8, 4}, {0, 4}, 8);
  std::vector<SentenceRecord> corpus(6);
  corpus[0].tokens = {"tk0"}; // informative
  for (std::size_t i = 1; i < corpus.size(); ++i) corpus[i].tokens = {"tk1"}; // ratio 0
  const ScoredUnits scored = score_corpus(m, corpus);
  const auto [lo, hi] = bootstrap_ci(scored, 200, 11);
  CHECK(lo >= 0.0);
  CHECK(hi <= 1.0);
}

TEST_CASE("bootstrap validates B") {
  const OccurrenceModel m = synthetic_model({8, 0}, {0, 8}, 8);
  Rng rng(2);
  const auto corpus = sample_mixture(m, 0.2, 50, rng);
  CHECK_THROWS_AS(bootstrap_ci(score_corpus(m, corpus), 99, 0), UsageError);
}

TEST_CASE("estimate_with_ci brackets the point estimate") {
  const OccurrenceModel m = synthetic_model({8, 0, 6, 2}, {0, 8, 2, 6}, 8);
  Rng rng(83);
  const auto corpus = sample_mixture(m, 0.2, 600, rng);
  const Units units = make_units(std::span<const SentenceRecord>(corpus));
  const MixtureEstimate est = estimate_with_ci(m, units, 300, 7);
  REQUIRE(est.ci_low.has_value());
  REQUIRE(est.ci_high.has_value());
  CHECK(*est.ci_low <= est.alpha);
  CHECK(est.alpha <= *est.ci_high);
  CHECK(*est.ci_low <= *est.ci_high);
  CHECK(est.n + est.n_skipped == 600); // all-miss Bernoulli draws are skipped
  CHECK(est.n > 500);
}
