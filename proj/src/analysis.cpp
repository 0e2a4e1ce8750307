#include "analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <unordered_set>

#include "checksum.hpp"
#include "errors.hpp"
#include "parallel.hpp"
#include "rng.hpp"
#include "text.hpp"

namespace llmfrac {

namespace {

std::string common_value_or_mixed(const Corpus& corpus, auto&& get) {
  std::string value;
  bool first = true;
  for (const auto& r : corpus.records) {
    std::string v = get(r);
    if (first) {
      value = std::move(v);
      first = false;
    } else if (v != value) {
      return "mixed";
    }
  }
  return first ? std::string("empty") : value;
}

// Builds a trend over the scored units whose record passes the filter.
// Bucket seeds are keyed on the month label, so a bucket's bootstrap
// draws do not depend on which other buckets exist.
TrendSeries trend_over(const Corpus& corpus, const ScoredUnits& scored, auto&& record_filter,
                       std::size_t min_bucket, int bootstrap_b, std::uint64_t seed) {
  std::map<std::string, std::vector<std::size_t>> by_month; // sorted by label
  for (std::size_t i = 0; i < scored.size(); ++i) {
    const std::size_t rec = scored.record_index[i];
    if (!record_filter(rec)) continue;
    by_month[corpus.records[rec].date.year_month()].push_back(i);
  }

  TrendSeries series;
  series.venue = common_value_or_mixed(corpus, [](const RawRecord& r) { return r.venue; });
  series.section =
      common_value_or_mixed(corpus, [](const RawRecord& r) { return std::string(to_string(r.section)); });

  for (const auto& [month, idx] : by_month) {
    ScoredUnits subset;
    subset.log_p.reserve(idx.size());
    subset.log_ratio.reserve(idx.size());
    subset.ratio_em1.reserve(idx.size());
    for (std::size_t i : idx) {
      subset.log_p.push_back(scored.log_p[i]);
      subset.log_ratio.push_back(scored.log_ratio[i]);
      subset.ratio_em1.push_back(scored.ratio_em1[i]);
    }
    TrendBucket bucket;
    bucket.month = month;
    bucket.low_sample = idx.size() < min_bucket;
    try {
      bucket.estimate = estimate_alpha(subset);
      if (bootstrap_b > 0) {
        auto [lo, hi] = bootstrap_ci(subset, bootstrap_b, derive_seed(seed, fnv1a64(month)));
        bucket.estimate.ci_low = std::min(lo, bucket.estimate.alpha);
        bucket.estimate.ci_high = std::max(hi, bucket.estimate.alpha);
      }
      series.buckets.push_back(std::move(bucket));
    } catch (const DataError& e) {
      series.failed_months.emplace_back(month, e.what());
    }
  }
  return series;
}

} // namespace

TrendSeries monthly_trend(const OccurrenceModel& model, const Corpus& corpus,
                          std::size_t min_bucket, int bootstrap_b, std::uint64_t seed) {
  if (corpus.records.empty()) throw DataError("monthly_trend: empty corpus");
  const Units units = make_units(corpus, model.unit);
  const ScoredUnits scored = score_units(model, units);
  return trend_over(corpus, scored, [](std::size_t) { return true; }, min_bucket, bootstrap_b,
                    seed);
}

StrataPredicate strata_predicate_from_string(const std::string& s) {
  if (s == "preprint_count") return StrataPredicate::preprint_count;
  if (s == "fulltext_words") return StrataPredicate::fulltext_words;
  if (s == "nn_distance") return StrataPredicate::nn_distance;
  throw UsageError("unknown stratification predicate '" + s + "'");
}

const char* to_string(StrataPredicate p) {
  switch (p) {
    case StrataPredicate::preprint_count: return "preprint_count";
    case StrataPredicate::fulltext_words: return "fulltext_words";
    default: return "nn_distance";
  }
}

NnMetric nn_metric_from_string(const std::string& s) {
  if (s == "cosine") return NnMetric::cosine;
  if (s == "euclidean") return NnMetric::euclidean;
  throw UsageError("unknown nearest-neighbor metric '" + s + "'");
}

NnDistances nn_distance(const Corpus& corpus, NnMetric metric, bool dedup_identical) {
  const std::size_t n = corpus.records.size();
  NnDistances out;
  out.distance.assign(n, std::numeric_limits<double>::quiet_NaN());

  // The pool dimension is fixed by the first embedded record; everything
  // else is excluded and counted.
  std::size_t dim = 0;
  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& e = corpus.records[i].embedding;
    if (!e || e->empty()) {
      ++out.excluded;
      continue;
    }
    if (dim == 0) dim = e->size();
    if (e->size() != dim) {
      ++out.excluded;
      continue;
    }
    pool.push_back(i);
  }
  if (pool.size() < 2) {
    out.excluded = n;
    for (auto& d : out.distance) d = std::numeric_limits<double>::quiet_NaN();
    return out;
  }

  std::vector<double> norm(pool.size(), 0.0);
  for (std::size_t a = 0; a < pool.size(); ++a) {
    const auto& va = *corpus.records[pool[a]].embedding;
    double s = 0;
    for (double x : va) s += x * x;
    norm[a] = std::sqrt(s);
  }

  parallel_chunks(pool.size(), 64, [&](std::size_t, std::size_t b, std::size_t e) {
    for (std::size_t a = b; a < e; ++a) {
      const auto& va = *corpus.records[pool[a]].embedding;
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < pool.size(); ++c) {
        if (c == a) continue;
        const auto& vc = *corpus.records[pool[c]].embedding;
        if (dedup_identical && vc == va) continue;
        double d;
        if (metric == NnMetric::cosine) {
          double dot = 0;
          for (std::size_t k = 0; k < dim; ++k) dot += va[k] * vc[k];
          const double denom = norm[a] * norm[c];
          if (denom == 0) continue; // zero vectors have no direction
          d = 1.0 - dot / denom;
        } else {
          double s = 0;
          for (std::size_t k = 0; k < dim; ++k) {
            const double diff = va[k] - vc[k];
            s += diff * diff;
          }
          d = std::sqrt(s);
        }
        best = std::min(best, d);
      }
      out.distance[pool[a]] = best;
    }
  });

  // Zero-norm records never get a cosine distance.
  for (std::size_t a = 0; a < pool.size(); ++a) {
    if (std::isinf(out.distance[pool[a]]) || std::isnan(out.distance[pool[a]])) {
      out.distance[pool[a]] = std::numeric_limits<double>::quiet_NaN();
      ++out.excluded;
    }
  }
  return out;
}

MedianSplit median_split(std::span<const double> values) {
  std::vector<std::pair<double, std::size_t>> finite;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (std::isfinite(values[i])) finite.emplace_back(values[i], i);
  }
  if (finite.size() < 2) throw DataError("median_split: need at least 2 finite values");

  std::vector<double> sorted;
  sorted.reserve(finite.size());
  for (const auto& [v, i] : finite) sorted.push_back(v);
  std::sort(sorted.begin(), sorted.end());
  const double threshold = sorted[(finite.size() - 1) / 2]; // lower median
  if (sorted.front() == sorted.back()) throw DataError("median_split: degenerate split (all values equal)");

  MedianSplit out;
  out.threshold = threshold;
  for (const auto& [v, i] : finite) {
    (v <= threshold ? out.below_or_equal : out.above).push_back(i);
  }
  if (out.above.empty()) throw DataError("median_split: degenerate split (no values above median)");
  return out;
}

StrataResult stratify(const OccurrenceModel& model, const Corpus& corpus,
                      StrataPredicate predicate, const StrataOptions& options) {
  if (corpus.records.empty()) throw DataError("stratify: empty corpus");

  // -1 excluded, 0 stratum A, 1 stratum B
  std::vector<int> assignment(corpus.records.size(), -1);
  StrataResult result;

  switch (predicate) {
    case StrataPredicate::preprint_count: {
      const auto threshold = static_cast<std::int64_t>(options.threshold.value_or(3));
      result.threshold = static_cast<double>(threshold);
      result.label_a = "preprints<=" + std::to_string(threshold - 1);
      result.label_b = "preprints>=" + std::to_string(threshold);
      result.predicate_description =
          "first-author preprint count in year, upper stratum at >= " + std::to_string(threshold);
      for (std::size_t i = 0; i < corpus.records.size(); ++i) {
        const auto& v = corpus.records[i].preprint_count_year;
        if (v) assignment[i] = *v >= threshold ? 1 : 0;
      }
      break;
    }
    case StrataPredicate::fulltext_words: {
      const auto threshold = static_cast<std::int64_t>(options.threshold.value_or(5000));
      result.threshold = static_cast<double>(threshold);
      result.label_a = "words<" + std::to_string(threshold);
      result.label_b = "words>=" + std::to_string(threshold);
      result.predicate_description =
          "full-text word count, long stratum at >= " + std::to_string(threshold);
      for (std::size_t i = 0; i < corpus.records.size(); ++i) {
        const auto& v = corpus.records[i].fulltext_word_count;
        if (v) assignment[i] = *v >= threshold ? 1 : 0;
      }
      break;
    }
    case StrataPredicate::nn_distance: {
      const NnDistances distances = nn_distance(corpus, options.metric, options.nn_dedup);
      double threshold;
      if (options.threshold) {
        threshold = *options.threshold;
      } else {
        threshold = median_split(distances.distance).threshold;
      }
      result.threshold = threshold;
      result.label_a = "nn_distance<=median"; // more similar to closest peer
      result.label_b = "nn_distance>median";
      result.predicate_description = "nearest-neighbor embedding distance, split at " +
                                     std::to_string(threshold) +
                                     (options.metric == NnMetric::cosine ? " (cosine)" : " (euclidean)");
      for (std::size_t i = 0; i < corpus.records.size(); ++i) {
        const double d = distances.distance[i];
        if (std::isfinite(d)) assignment[i] = d <= threshold ? 0 : 1;
      }
      break;
    }
  }

  std::size_t count_a = 0, count_b = 0;
  for (int a : assignment) {
    if (a == 0) ++count_a;
    else if (a == 1) ++count_b;
    else ++result.excluded;
  }
  if (count_a == 0 || count_b == 0)
    throw DataError(std::string("stratify: predicate '") + to_string(predicate) +
                    "' produced an empty stratum");

  const Units units = make_units(corpus, model.unit);
  const ScoredUnits scored = score_units(model, units);
  auto in_stratum = [&](int which) {
    return [&, which](std::size_t rec) { return assignment[rec] == which; };
  };
  result.series_a = trend_over(corpus, scored, in_stratum(0), options.min_bucket,
                               options.bootstrap_b, derive_seed(options.seed, 0));
  result.series_b = trend_over(corpus, scored, in_stratum(1), options.min_bucket,
                               options.bootstrap_b, derive_seed(options.seed, 1));
  return result;
}

WordShiftRanking log_odds_ranking(const OccurrenceModel& model, std::size_t k) {
  if (k < 1) throw UsageError("log_odds_ranking: k must be >= 1");
  const std::size_t m = model.vocabulary.tokens.size();

  WordShiftRanking out;
  out.ranked.reserve(m);
  for (std::size_t t = 0; t < m; ++t) {
    const double p = model.p(t);
    const double q = model.q(t);
    const double lor = (std::log(q) - std::log1p(-q)) - (std::log(p) - std::log1p(-p));
    out.ranked.emplace_back(model.vocabulary.tokens[t], lor);
  }
  std::sort(out.ranked.begin(), out.ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (k < out.ranked.size()) {
    out.ranked.resize(k);
  } else if (k > m) {
    out.truncated = true;
  }
  return out;
}

WordFrequencySeries word_frequency_series(const Corpus& corpus,
                                          std::span<const std::string> words,
                                          FrequencyBucket bucket) {
  if (words.empty()) throw UsageError("word_frequency_series: words must be non-empty");

  WordFrequencySeries out;
  for (const auto& w : words) out.words.push_back(normalize(w));

  struct Tally {
    std::vector<std::int64_t> sentence_hits;
    std::int64_t n_sentences = 0;
    std::unordered_set<std::string> record_ids;
    std::vector<std::unordered_set<std::string>> record_hit_ids;
  };
  std::map<std::string, Tally> buckets;

  for (const auto& s : corpus.sentences) {
    const auto& record = corpus.record_of(s);
    const std::string label =
        bucket == FrequencyBucket::month ? record.date.year_month() : std::to_string(record.date.year);
    auto& tally = buckets[label];
    if (tally.sentence_hits.empty()) {
      tally.sentence_hits.assign(out.words.size(), 0);
      tally.record_hit_ids.resize(out.words.size());
    }
    ++tally.n_sentences;
    tally.record_ids.insert(record.id);
    for (std::size_t w = 0; w < out.words.size(); ++w) {
      if (std::binary_search(s.tokens.begin(), s.tokens.end(), out.words[w])) {
        ++tally.sentence_hits[w];
        tally.record_hit_ids[w].insert(record.id);
      }
    }
  }

  for (auto& [label, tally] : buckets) {
    WordFrequencySeries::Bucket b;
    b.label = label;
    b.n_sentences = tally.n_sentences;
    b.n_records = static_cast<std::int64_t>(tally.record_ids.size());
    for (std::size_t w = 0; w < out.words.size(); ++w) {
      b.sentence_fraction.push_back(
          tally.n_sentences == 0 ? 0.0
                                 : static_cast<double>(tally.sentence_hits[w]) /
                                       static_cast<double>(tally.n_sentences));
      b.record_fraction.push_back(
          b.n_records == 0 ? 0.0
                           : static_cast<double>(tally.record_hit_ids[w].size()) /
                                 static_cast<double>(b.n_records));
    }
    out.buckets.push_back(std::move(b));
  }
  return out;
}

} // namespace llmfrac
