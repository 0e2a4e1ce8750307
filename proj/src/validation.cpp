#include "validation.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "errors.hpp"
#include "rng.hpp"

namespace llmfrac {

namespace {

std::vector<std::size_t> nonempty_indices(std::span<const SentenceRecord> pool) {
  std::vector<std::size_t> idx;
  idx.reserve(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (!pool[i].tokens.empty()) idx.push_back(i);
  }
  return idx;
}

} // namespace

std::vector<SentenceRecord> make_mixture(std::span<const SentenceRecord> human_heldout,
                                         std::span<const SentenceRecord> llm_heldout,
                                         double alpha, std::size_t n, std::uint64_t seed) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw UsageError("make_mixture: alpha must lie in [0, 1]");
  if (n == 0) throw UsageError("make_mixture: n must be >= 1");

  const std::vector<std::size_t> human_pool = nonempty_indices(human_heldout);
  const std::vector<std::size_t> llm_pool = nonempty_indices(llm_heldout);

  const std::size_t k_llm = static_cast<std::size_t>(std::floor(alpha * static_cast<double>(n)));
  const std::size_t k_human = n - k_llm;
  if (k_llm > llm_pool.size())
    throw DataError("make_mixture: need " + std::to_string(k_llm) + " LLM sentences, only " +
                    std::to_string(llm_pool.size()) + " available");
  if (k_human > human_pool.size())
    throw DataError("make_mixture: need " + std::to_string(k_human) + " human sentences, only " +
                    std::to_string(human_pool.size()) + " available");

  Rng rng(seed);
  std::vector<SentenceRecord> mixture;
  mixture.reserve(n);
  for (std::size_t i : rng.sample_without_replacement(llm_pool.size(), k_llm))
    mixture.push_back(llm_heldout[llm_pool[i]]);
  for (std::size_t i : rng.sample_without_replacement(human_pool.size(), k_human))
    mixture.push_back(human_heldout[human_pool[i]]);
  rng.shuffle(mixture);
  return mixture;
}

namespace {

void check_manifest(const OccurrenceModel& model, std::span<const SentenceRecord> pool,
                    const char* pool_name) {
  std::unordered_set<std::string_view> manifest(model.training_ids.begin(),
                                                model.training_ids.end());
  for (const auto& s : pool) {
    if (manifest.count(s.parent_id)) {
      throw DataError(std::string("run_sweep: held-out ") + pool_name + " sentence '" +
                      s.parent_id + "' appears in the model's training-id manifest");
    }
  }
}

} // namespace

ValidationReport run_sweep(const OccurrenceModel& model,
                           std::span<const SentenceRecord> human_heldout,
                           std::span<const SentenceRecord> llm_heldout,
                           std::span<const double> alphas, std::size_t n, int bootstrap_b,
                           std::uint64_t seed) {
  if (alphas.empty()) throw UsageError("run_sweep: alphas must be non-empty");
  for (double a : alphas) {
    if (!(a >= 0.0 && a <= 1.0)) throw UsageError("run_sweep: every alpha must lie in [0, 1]");
  }

  ValidationReport report;
  report.seed = seed;
  report.manifest_checked = !model.training_ids.empty();
  if (report.manifest_checked) {
    check_manifest(model, human_heldout, "human");
    check_manifest(model, llm_heldout, "llm");
  }

  std::vector<double> sorted(alphas.begin(), alphas.end());
  std::sort(sorted.begin(), sorted.end());

  for (std::size_t i = 0; i < sorted.size(); ++i) {
    ValidationPoint point;
    point.alpha_true = sorted[i];
    try {
      const auto mixture =
          make_mixture(human_heldout, llm_heldout, sorted[i], n, derive_seed(seed, 2 * i));
      const Units units = make_units(std::span<const SentenceRecord>(mixture));
      const MixtureEstimate est =
          estimate_with_ci(model, units, bootstrap_b, derive_seed(seed, 2 * i + 1));
      point.alpha_est = est.alpha;
      point.ci_low = est.ci_low;
      point.ci_high = est.ci_high;
      point.n = est.n;
      point.ok = true;
    } catch (const DataError& e) {
      point.ok = false;
      point.error = e.what();
    }
    report.points.push_back(std::move(point));
  }

  double max_err = 0;
  for (const auto& p : report.points) {
    if (p.ok) max_err = std::max(max_err, std::fabs(p.alpha_est - p.alpha_true));
  }
  report.max_abs_error = max_err;
  return report;
}

} // namespace llmfrac
