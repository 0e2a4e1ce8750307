#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "corpus.hpp"
#include "vocab.hpp"

namespace llmfrac {

enum class Unit { sentence, document };
const char* to_string(Unit u);
Unit unit_from_string(const std::string& s);

using TokenSet = std::vector<std::string>;

// A view of the data points the occurrence model operates on: one token
// set per unit. Sentence unit points straight into corpus sentences;
// document unit owns the per-record token unions. record_index (when
// built from a corpus) maps each unit back to its record for grouping.
struct Units {
  std::vector<TokenSet> owned;
  std::vector<const TokenSet*> view;
  std::vector<std::uint32_t> record_index;

  std::size_t size() const { return view.size(); }
};

Units make_units(const Corpus& corpus, Unit unit);
Units make_units(std::span<const SentenceRecord> sentences);

// Token occurrence counts for the human (p) and LLM (q) reference
// corpora, stored as counts so smoothing can be re-applied exactly.
struct OccurrenceModel {
  Vocabulary vocabulary;
  std::int64_t n_p = 0;
  std::int64_t n_q = 0;
  std::vector<std::int64_t> occ_p; // parallel to vocabulary.tokens
  std::vector<std::int64_t> occ_q;
  double smoothing = 1.0;
  Unit unit = Unit::sentence;
  std::vector<std::string> training_ids; // optional manifest, sorted unique
  std::string provenance_json; // optional {tool_version, config, inputs} block

  // Smoothed probabilities, strictly interior to (0, 1).
  double p(std::size_t t) const {
    return (static_cast<double>(occ_p[t]) + smoothing) / (static_cast<double>(n_p) + 2 * smoothing);
  }
  double q(std::size_t t) const {
    return (static_cast<double>(occ_q[t]) + smoothing) / (static_cast<double>(n_q) + 2 * smoothing);
  }

  OccurrenceModel with_smoothing(double s) const;
};

struct FitResult {
  OccurrenceModel model;
  std::size_t human_empty_skipped = 0;
  std::size_t llm_empty_skipped = 0;
};

FitResult fit_model(const Units& human, const Units& llm, const Vocabulary& vocabulary,
                    double smoothing, Unit unit, std::vector<std::string> training_ids = {});

struct SentenceScore {
  double log_p = 0;
  double log_q = 0;
  double log_ratio = 0; // log_q - log_p
};

// Precomputed scoring tables. log P(X) over the full vocabulary is the
// all-absent baseline plus one delta per present token, so a sentence
// costs O(|X ∩ T|) instead of O(M).
class Scorer {
public:
  explicit Scorer(const OccurrenceModel& model);

  SentenceScore score(const TokenSet& tokens) const;
  double baseline_p() const { return base_p_; }
  double baseline_q() const { return base_q_; }

private:
  std::unordered_map<std::string, std::uint32_t> index_;
  std::vector<double> delta_p_; // log p_t - log(1 - p_t)
  std::vector<double> delta_q_;
  double base_p_ = 0;
  double base_q_ = 0;
};

// Model file round-trip (JSON, counts not probabilities, checksummed).
void save_model(const OccurrenceModel& model, const std::string& path);
OccurrenceModel load_model(const std::string& path);

std::string model_to_json(const OccurrenceModel& model);
OccurrenceModel model_from_json(const std::string& text);

} // namespace llmfrac
