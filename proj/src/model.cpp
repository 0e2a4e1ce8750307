#include "model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "checksum.hpp"
#include "errors.hpp"

namespace llmfrac {

using json = nlohmann::json;

const char* to_string(Unit u) { return u == Unit::sentence ? "sentence" : "document"; }

Unit unit_from_string(const std::string& s) {
  if (s == "sentence") return Unit::sentence;
  if (s == "document") return Unit::document;
  throw UsageError("unknown unit '" + s + "' (expected sentence|document)");
}

Units make_units(const Corpus& corpus, Unit unit) {
  Units u;
  if (unit == Unit::sentence) {
    u.view.reserve(corpus.sentences.size());
    u.record_index.reserve(corpus.sentences.size());
    for (const auto& s : corpus.sentences) {
      u.view.push_back(&s.tokens);
      auto it = corpus.by_id.find(s.parent_id);
      u.record_index.push_back(it == corpus.by_id.end()
                                   ? 0
                                   : static_cast<std::uint32_t>(it->second));
    }
    return u;
  }
  // Document unit: a token occurs if it occurs anywhere in the record.
  u.owned.resize(corpus.records.size());
  for (const auto& s : corpus.sentences) {
    auto it = corpus.by_id.find(s.parent_id);
    if (it == corpus.by_id.end()) continue;
    auto& dest = u.owned[it->second];
    dest.insert(dest.end(), s.tokens.begin(), s.tokens.end());
  }
  for (auto& tokens : u.owned) {
    std::sort(tokens.begin(), tokens.end());
    tokens.erase(std::unique(tokens.begin(), tokens.end()), tokens.end());
  }
  u.view.reserve(u.owned.size());
  u.record_index.reserve(u.owned.size());
  for (std::size_t i = 0; i < u.owned.size(); ++i) {
    u.view.push_back(&u.owned[i]);
    u.record_index.push_back(static_cast<std::uint32_t>(i));
  }
  return u;
}

Units make_units(std::span<const SentenceRecord> sentences) {
  Units u;
  u.view.reserve(sentences.size());
  for (const auto& s : sentences) u.view.push_back(&s.tokens);
  return u;
}

OccurrenceModel OccurrenceModel::with_smoothing(double s) const {
  if (!(s > 0)) throw UsageError("smoothing must be > 0");
  OccurrenceModel m = *this;
  m.smoothing = s;
  return m;
}

FitResult fit_model(const Units& human, const Units& llm, const Vocabulary& vocabulary,
                    double smoothing, Unit unit, std::vector<std::string> training_ids) {
  if (human.size() == 0 || llm.size() == 0)
    throw DataError("fit: both reference collections must be non-empty");
  if (!(smoothing > 0)) throw UsageError("fit: smoothing must be > 0");

  std::unordered_map<std::string, std::uint32_t> index;
  index.reserve(vocabulary.tokens.size() * 2);
  for (std::uint32_t i = 0; i < vocabulary.tokens.size(); ++i)
    index.emplace(vocabulary.tokens[i], i);

  FitResult out;
  OccurrenceModel& m = out.model;
  m.vocabulary = vocabulary;
  m.smoothing = smoothing;
  m.unit = unit;
  m.occ_p.assign(vocabulary.tokens.size(), 0);
  m.occ_q.assign(vocabulary.tokens.size(), 0);

  auto count = [&](const Units& units, std::vector<std::int64_t>& occ, std::int64_t& n,
                   std::size_t& skipped) {
    for (const TokenSet* tokens : units.view) {
      if (tokens->empty()) {
        ++skipped;
        continue;
      }
      ++n;
      for (const auto& t : *tokens) {
        auto it = index.find(t);
        if (it != index.end()) ++occ[it->second];
      }
    }
    if (n == 0) throw DataError("fit: reference collection has no non-empty units");
  };
  count(human, m.occ_p, m.n_p, out.human_empty_skipped);
  count(llm, m.occ_q, m.n_q, out.llm_empty_skipped);

  std::sort(training_ids.begin(), training_ids.end());
  training_ids.erase(std::unique(training_ids.begin(), training_ids.end()), training_ids.end());
  m.training_ids = std::move(training_ids);
  return out;
}

Scorer::Scorer(const OccurrenceModel& model) {
  const std::size_t m = model.vocabulary.tokens.size();
  index_.reserve(m * 2);
  delta_p_.resize(m);
  delta_q_.resize(m);
  for (std::uint32_t i = 0; i < m; ++i) {
    index_.emplace(model.vocabulary.tokens[i], i);
    const double p = model.p(i);
    const double q = model.q(i);
    const double lp = std::log(p), l1p = std::log1p(-p);
    const double lq = std::log(q), l1q = std::log1p(-q);
    delta_p_[i] = lp - l1p;
    delta_q_[i] = lq - l1q;
    base_p_ += l1p;
    base_q_ += l1q;
  }
}

SentenceScore Scorer::score(const TokenSet& tokens) const {
  double acc_p = base_p_;
  double acc_q = base_q_;
  for (const auto& t : tokens) {
    auto it = index_.find(t);
    if (it == index_.end()) continue; // tokens outside T are ignored
    acc_p += delta_p_[it->second];
    acc_q += delta_q_[it->second];
  }
  return {acc_p, acc_q, acc_q - acc_p};
}

namespace {

constexpr int kFormatVersion = 1;

const char* vocab_source_name(VocabSource s) {
  return s == VocabSource::full ? "full" : "external-list";
}

VocabSource vocab_source_from(const std::string& s) {
  if (s == "full") return VocabSource::full;
  if (s == "external-list") return VocabSource::external_list;
  throw DataError("model file: unknown vocabulary source '" + s + "'");
}

json model_payload(const OccurrenceModel& m) {
  json j;
  j["format_version"] = kFormatVersion;
  j["unit"] = to_string(m.unit);
  j["smoothing"] = m.smoothing;
  j["n_p"] = m.n_p;
  j["n_q"] = m.n_q;
  j["vocabulary"] = {{"source", vocab_source_name(m.vocabulary.source)},
                     {"min_df", m.vocabulary.min_df},
                     {"tokens", m.vocabulary.tokens}};
  j["occ_p"] = m.occ_p;
  j["occ_q"] = m.occ_q;
  if (!m.training_ids.empty()) j["training_ids"] = m.training_ids;
  if (!m.provenance_json.empty()) {
    try {
      j["provenance"] = json::parse(m.provenance_json);
    } catch (const json::exception&) {
      throw UsageError("model provenance must be valid JSON");
    }
  }
  return j;
}

} // namespace

std::string model_to_json(const OccurrenceModel& m) {
  json j = model_payload(m);
  j["checksum"] = fnv1a64_hex(j.dump());
  return j.dump();
}

OccurrenceModel model_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception&) {
    throw DataError("model file corrupt: checksum cannot be verified (truncated or invalid JSON)");
  }
  try {
    if (!j.contains("format_version") || j.at("format_version").get<int>() != kFormatVersion)
      throw DataError("model file: format version mismatch (expected " +
                      std::to_string(kFormatVersion) + ")");
    if (!j.contains("checksum")) throw DataError("model file: missing checksum");
    const std::string stored = j.at("checksum").get<std::string>();
    j.erase("checksum");
    if (fnv1a64_hex(j.dump()) != stored) throw DataError("model file: checksum mismatch");

    OccurrenceModel m;
    m.unit = unit_from_string(j.at("unit").get<std::string>());
    m.smoothing = j.at("smoothing").get<double>();
    m.n_p = j.at("n_p").get<std::int64_t>();
    m.n_q = j.at("n_q").get<std::int64_t>();
    const auto& v = j.at("vocabulary");
    m.vocabulary.source = vocab_source_from(v.at("source").get<std::string>());
    m.vocabulary.min_df = v.at("min_df").get<std::int64_t>();
    m.vocabulary.tokens = v.at("tokens").get<std::vector<std::string>>();
    m.occ_p = j.at("occ_p").get<std::vector<std::int64_t>>();
    m.occ_q = j.at("occ_q").get<std::vector<std::int64_t>>();
    if (j.contains("training_ids"))
      m.training_ids = j.at("training_ids").get<std::vector<std::string>>();
    if (j.contains("provenance")) m.provenance_json = j.at("provenance").dump();

    if (m.occ_p.size() != m.vocabulary.tokens.size() ||
        m.occ_q.size() != m.vocabulary.tokens.size())
      throw DataError("model file: occurrence arrays do not match vocabulary size");
    if (!(m.smoothing > 0)) throw DataError("model file: smoothing must be > 0");
    for (std::size_t i = 0; i < m.occ_p.size(); ++i) {
      if (m.occ_p[i] < 0 || m.occ_p[i] > m.n_p || m.occ_q[i] < 0 || m.occ_q[i] > m.n_q)
        throw DataError("model file: occurrence count out of range");
    }
    return m;
  } catch (const json::exception& e) {
    throw DataError(std::string("model file: bad structure (") + e.what() + ")");
  }
}

void save_model(const OccurrenceModel& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  out << model_to_json(m) << '\n';
  if (!out) throw DataError("write failed for '" + path + "'");
}

OccurrenceModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open model file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return model_from_json(buf.str());
}

} // namespace llmfrac
