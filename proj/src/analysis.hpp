#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "estimator.hpp"

namespace llmfrac {

// Downstream corpus analyses: monthly trends, metadata stratifications,
// nearest-neighbor distances, and word-level frequency shifts.

struct TrendBucket {
  std::string month; // yyyy-mm
  MixtureEstimate estimate;
  bool low_sample = false;
};

struct TrendSeries {
  std::string venue;   // "mixed" when records disagree
  std::string section; // likewise
  std::vector<TrendBucket> buckets; // sorted by month, independently estimated
  std::vector<std::pair<std::string, std::string>> failed_months; // month -> error
};

TrendSeries monthly_trend(const OccurrenceModel& model, const Corpus& corpus,
                          std::size_t min_bucket, int bootstrap_b, std::uint64_t seed);

enum class StrataPredicate { preprint_count, fulltext_words, nn_distance };
StrataPredicate strata_predicate_from_string(const std::string& s);
const char* to_string(StrataPredicate p);

enum class NnMetric { cosine, euclidean };
NnMetric nn_metric_from_string(const std::string& s);

struct StrataResult {
  std::string predicate_description;
  double threshold = 0;
  std::string label_a; // lower stratum (fewer preprints / shorter / more similar)
  std::string label_b;
  TrendSeries series_a;
  TrendSeries series_b;
  std::size_t excluded = 0; // records lacking the needed metadata
};

struct StrataOptions {
  std::optional<double> threshold; // default: 3 preprints / 5000 words / median distance
  NnMetric metric = NnMetric::cosine;
  bool nn_dedup = false; // skip bit-identical embeddings when searching
  std::size_t min_bucket = 200;
  int bootstrap_b = 1000;
  std::uint64_t seed = 0;
};

StrataResult stratify(const OccurrenceModel& model, const Corpus& corpus,
                      StrataPredicate predicate, const StrataOptions& options);

// Exact brute-force distance to the nearest other record in the pool.
// distance[i] is NaN for records without a usable embedding. With
// dedup_identical, candidates whose embedding equals the query's are
// skipped, so exact duplicates do not pin distances at zero.
struct NnDistances {
  std::vector<double> distance; // parallel to corpus.records
  std::size_t excluded = 0;
};

NnDistances nn_distance(const Corpus& corpus, NnMetric metric, bool dedup_identical = false);

// Lower-median split: threshold, below-or-equal indices, above indices.
struct MedianSplit {
  double threshold = 0;
  std::vector<std::size_t> below_or_equal;
  std::vector<std::size_t> above;
};

MedianSplit median_split(std::span<const double> values);

// Tokens ranked by log[q/(1-q)] - log[p/(1-p)], descending, ties broken
// lexicographically. k > M returns all M with the truncated flag set.
struct WordShiftRanking {
  std::vector<std::pair<std::string, double>> ranked;
  bool truncated = false;
};

WordShiftRanking log_odds_ranking(const OccurrenceModel& model, std::size_t k);

enum class FrequencyBucket { month, year };

struct WordFrequencySeries {
  std::vector<std::string> words;
  struct Bucket {
    std::string label; // yyyy-mm or yyyy
    std::vector<double> sentence_fraction; // parallel to words
    std::vector<double> record_fraction;
    std::int64_t n_sentences = 0;
    std::int64_t n_records = 0;
  };
  std::vector<Bucket> buckets; // sorted by label
};

WordFrequencySeries word_frequency_series(const Corpus& corpus,
                                          std::span<const std::string> words,
                                          FrequencyBucket bucket);

} // namespace llmfrac
