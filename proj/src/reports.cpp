#include "reports.hpp"

#include <cmath>

namespace llmfrac {

using json = nlohmann::json;

json to_json(const MixtureEstimate& e) {
  json j;
  j["alpha"] = e.alpha;
  j["loglik"] = e.loglik;
  j["n"] = e.n;
  j["n_skipped"] = e.n_skipped;
  j["ci_low"] = e.ci_low ? json(*e.ci_low) : json(nullptr);
  j["ci_high"] = e.ci_high ? json(*e.ci_high) : json(nullptr);
  return j;
}

json to_json(const ValidationReport& r) {
  json points = json::array();
  for (const auto& p : r.points) {
    json jp;
    jp["alpha_true"] = p.alpha_true;
    jp["ok"] = p.ok;
    if (p.ok) {
      jp["alpha_est"] = p.alpha_est;
      jp["abs_error"] = std::fabs(p.alpha_est - p.alpha_true);
      jp["ci_low"] = p.ci_low ? json(*p.ci_low) : json(nullptr);
      jp["ci_high"] = p.ci_high ? json(*p.ci_high) : json(nullptr);
      jp["n"] = p.n;
    } else {
      jp["error"] = p.error;
    }
    points.push_back(std::move(jp));
  }
  json j;
  j["points"] = std::move(points);
  j["max_abs_error"] = r.max_abs_error;
  j["seed"] = r.seed;
  j["manifest_checked"] = r.manifest_checked;
  return j;
}

json to_json(const TrendSeries& s) {
  json buckets = json::array();
  for (const auto& b : s.buckets) {
    json jb = to_json(b.estimate);
    jb["month"] = b.month;
    jb["low_sample"] = b.low_sample;
    buckets.push_back(std::move(jb));
  }
  json failed = json::array();
  for (const auto& [month, error] : s.failed_months)
    failed.push_back(json{{"month", month}, {"error", error}});
  json j;
  j["venue"] = s.venue;
  j["section"] = s.section;
  j["buckets"] = std::move(buckets);
  j["failed_months"] = std::move(failed);
  return j;
}

json to_json(const StrataResult& r) {
  json j;
  j["predicate"] = r.predicate_description;
  j["threshold"] = r.threshold;
  j["excluded"] = r.excluded;
  j["label_a"] = r.label_a;
  j["label_b"] = r.label_b;
  j["series_a"] = to_json(r.series_a);
  j["series_b"] = to_json(r.series_b);
  return j;
}

json to_json(const WordShiftRanking& r) {
  json ranked = json::array();
  for (const auto& [token, lor] : r.ranked)
    ranked.push_back(json{{"token", token}, {"log_odds_ratio", lor}});
  json j;
  j["ranked"] = std::move(ranked);
  j["truncated"] = r.truncated;
  return j;
}

json to_json(const WordFrequencySeries& s) {
  json buckets = json::array();
  for (const auto& b : s.buckets) {
    json jb;
    jb["bucket"] = b.label;
    jb["n_sentences"] = b.n_sentences;
    jb["n_records"] = b.n_records;
    json by_word = json::object();
    for (std::size_t w = 0; w < s.words.size(); ++w) {
      by_word[s.words[w]] = {{"sentence_fraction", b.sentence_fraction[w]},
                             {"record_fraction", b.record_fraction[w]}};
    }
    jb["words"] = std::move(by_word);
    buckets.push_back(std::move(jb));
  }
  json j;
  j["words"] = s.words;
  j["buckets"] = std::move(buckets);
  return j;
}

} // namespace llmfrac
