#include "llmfrac.h"

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "analysis.hpp"
#include "checksum.hpp"
#include "corpus.hpp"
#include "errors.hpp"
#include "estimator.hpp"
#include "genpipe.hpp"
#include "model.hpp"
#include "parallel.hpp"
#include "reports.hpp"
#include "validation.hpp"
#include "vocab.hpp"

using nlohmann::json;

struct llmfrac_corpus {
  llmfrac::Corpus corpus;
};
struct llmfrac_vocab {
  llmfrac::Vocabulary vocabulary;
};
struct llmfrac_model {
  llmfrac::OccurrenceModel model;
};

namespace {

thread_local std::string g_last_error;

int fail(int code, const std::string& message) {
  g_last_error = message;
  return code;
}

// Runs fn, translating exceptions into status codes.
template <typename Fn>
int wrap(Fn&& fn) {
  try {
    fn();
    return LLMFRAC_OK;
  } catch (const llmfrac::UsageError& e) {
    return fail(LLMFRAC_ERR_USAGE, e.what());
  } catch (const llmfrac::DataError& e) {
    return fail(LLMFRAC_ERR_DATA, e.what());
  } catch (const llmfrac::TransportError& e) {
    return fail(LLMFRAC_ERR_TRANSPORT, e.what());
  } catch (const std::exception& e) {
    return fail(LLMFRAC_ERR_DATA, e.what());
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

int require(bool ok, const char* what) {
  if (ok) return LLMFRAC_OK;
  return fail(LLMFRAC_ERR_USAGE, std::string("null argument: ") + what);
}

llmfrac::GenPipeConfig parse_genpipe_config(const char* config_json) {
  llmfrac::GenPipeConfig cfg;
  if (const char* key = std::getenv("LLMFRAC_API_KEY")) cfg.api_key = key;
  if (config_json == nullptr || *config_json == '\0') return cfg;
  json j;
  try {
    j = json::parse(config_json);
  } catch (const json::exception& e) {
    throw llmfrac::UsageError(std::string("config_json is not valid JSON: ") + e.what());
  }
  if (j.contains("mode")) cfg.mode = j.at("mode").get<std::string>();
  if (cfg.mode != "live" && cfg.mode != "record" && cfg.mode != "replay")
    throw llmfrac::UsageError("unknown transport mode '" + cfg.mode +
                              "' (expected live|record|replay)");
  if (j.contains("endpoint")) cfg.endpoint = j.at("endpoint").get<std::string>();
  if (j.contains("model")) cfg.model = j.at("model").get<std::string>();
  if (j.contains("fixtures")) cfg.fixtures = j.at("fixtures").get<std::string>();
  if (j.contains("rpm")) cfg.requests_per_minute = j.at("rpm").get<double>();
  if (j.contains("max_in_flight")) cfg.max_in_flight = j.at("max_in_flight").get<int>();
  if (j.contains("max_attempts")) cfg.max_attempts = j.at("max_attempts").get<int>();
  if (j.contains("backoff_initial_seconds"))
    cfg.backoff_initial_seconds = j.at("backoff_initial_seconds").get<double>();
  if (j.contains("cutoff_date")) cfg.cutoff_date = j.at("cutoff_date").get<std::string>();
  if (j.contains("request_log")) cfg.request_log_path = j.at("request_log").get<std::string>();
  if (j.contains("api_key_env")) {
    const std::string env = j.at("api_key_env").get<std::string>();
    if (const char* key = std::getenv(env.c_str())) cfg.api_key = key;
  }
  return cfg;
}

json batch_stats_json(const llmfrac::BatchStats& s) {
  json j;
  j["total"] = s.total;
  j["completed"] = s.completed;
  j["skipped_existing"] = s.skipped_existing;
  j["skipped_post_cutoff"] = s.skipped_post_cutoff;
  j["failed"] = s.failed;
  return j;
}

} // namespace

extern "C" {

const char* llmfrac_version(void) { return "0.1.0"; }

const char* llmfrac_last_error(void) { return g_last_error.c_str(); }

void llmfrac_string_free(char* s) { std::free(s); }

int llmfrac_set_threads(int n) {
  if (n < 1) return fail(LLMFRAC_ERR_USAGE, "threads must be >= 1");
  llmfrac::set_worker_threads(n);
  return LLMFRAC_OK;
}

int llmfrac_file_checksum(const char* path, char** out_hex) {
  if (int rc = require(path && out_hex, "path/out_hex")) return rc;
  return wrap([&] {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw llmfrac::DataError(std::string("cannot open '") + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    *out_hex = dup_string(llmfrac::fnv1a64_hex(buf.str()));
  });
}

/* ---- corpus ---- */

int llmfrac_corpus_load(const char* path, const char* section_filter, llmfrac_corpus** out) {
  if (int rc = require(path && out, "path/out")) return rc;
  return wrap([&] {
    const auto filter = llmfrac::section_filter_from_string(section_filter ? section_filter : "any");
    auto handle = std::make_unique<llmfrac_corpus>();
    handle->corpus = llmfrac::load_corpus(path, filter);
    llmfrac::prepare(handle->corpus);
    *out = handle.release();
  });
}

void llmfrac_corpus_free(llmfrac_corpus* corpus) { delete corpus; }

int llmfrac_corpus_counts(const llmfrac_corpus* corpus, int64_t* records, int64_t* sentences,
                          int64_t* empty_token_sentences) {
  if (int rc = require(corpus != nullptr, "corpus")) return rc;
  if (records) *records = static_cast<int64_t>(corpus->corpus.records.size());
  if (sentences) *sentences = static_cast<int64_t>(corpus->corpus.sentences.size());
  if (empty_token_sentences)
    *empty_token_sentences = static_cast<int64_t>(corpus->corpus.empty_token_sentences);
  return LLMFRAC_OK;
}

int llmfrac_corpus_segment_dump(const llmfrac_corpus* corpus, char** out_jsonl) {
  if (int rc = require(corpus && out_jsonl, "corpus/out_jsonl")) return rc;
  return wrap([&] {
    std::string dump;
    for (const auto& s : corpus->corpus.sentences) {
      json j;
      j["parent_id"] = s.parent_id;
      j["index"] = s.index;
      j["raw"] = s.raw;
      j["tokens"] = s.tokens;
      dump += j.dump();
      dump += '\n';
    }
    *out_jsonl = dup_string(dump);
  });
}

int llmfrac_corpus_carry_author_meta(llmfrac_corpus* corpus, int64_t* filled) {
  if (int rc = require(corpus != nullptr, "corpus")) return rc;
  return wrap([&] {
    const std::size_t n = llmfrac::carry_forward_author_metadata(corpus->corpus);
    if (filled) *filled = static_cast<int64_t>(n);
  });
}

int llmfrac_corpus_load_embeddings(llmfrac_corpus* corpus, const char* path, int64_t* attached,
                                   int64_t* unmatched) {
  if (int rc = require(corpus && path, "corpus/path")) return rc;
  return wrap([&] {
    const llmfrac::SidecarLoad result = llmfrac::load_embeddings_sidecar(corpus->corpus, path);
    if (attached) *attached = static_cast<int64_t>(result.attached);
    if (unmatched) *unmatched = static_cast<int64_t>(result.unmatched);
  });
}

/* ---- vocabulary ---- */

int llmfrac_vocab_build(const llmfrac_corpus* human, const llmfrac_corpus* llm, int64_t min_df,
                        llmfrac_vocab** out) {
  if (int rc = require(human && llm && out, "human/llm/out")) return rc;
  return wrap([&] {
    auto handle = std::make_unique<llmfrac_vocab>();
    handle->vocabulary = llmfrac::build_vocabulary(human->corpus.sentences, llm->corpus.sentences,
                                                   min_df);
    *out = handle.release();
  });
}

int llmfrac_vocab_load_list(const char* path, llmfrac_vocab** out) {
  if (int rc = require(path && out, "path/out")) return rc;
  return wrap([&] {
    auto handle = std::make_unique<llmfrac_vocab>();
    handle->vocabulary = llmfrac::load_token_list(path).vocabulary;
    *out = handle.release();
  });
}

int llmfrac_vocab_size(const llmfrac_vocab* vocab, int64_t* out) {
  if (int rc = require(vocab && out, "vocab/out")) return rc;
  *out = static_cast<int64_t>(vocab->vocabulary.size());
  return LLMFRAC_OK;
}

void llmfrac_vocab_free(llmfrac_vocab* vocab) { delete vocab; }

/* ---- model ---- */

int llmfrac_model_fit(const llmfrac_corpus* human, const llmfrac_corpus* llm,
                      const llmfrac_vocab* vocab, double smoothing, const char* unit,
                      int record_manifest, llmfrac_model** out) {
  if (int rc = require(human && llm && vocab && out, "human/llm/vocab/out")) return rc;
  return wrap([&] {
    const llmfrac::Unit u = llmfrac::unit_from_string(unit ? unit : "sentence");
    std::vector<std::string> manifest;
    if (record_manifest) {
      for (const auto& r : human->corpus.records) manifest.push_back(r.id);
      for (const auto& r : llm->corpus.records) manifest.push_back(r.id);
    }
    auto handle = std::make_unique<llmfrac_model>();
    handle->model = llmfrac::fit_model(llmfrac::make_units(human->corpus, u),
                                       llmfrac::make_units(llm->corpus, u), vocab->vocabulary,
                                       smoothing, u, std::move(manifest))
                        .model;
    *out = handle.release();
  });
}

int llmfrac_model_save(const llmfrac_model* model, const char* path) {
  if (int rc = require(model && path, "model/path")) return rc;
  return wrap([&] { llmfrac::save_model(model->model, path); });
}

int llmfrac_model_set_provenance(llmfrac_model* model, const char* provenance_json) {
  if (int rc = require(model && provenance_json, "model/provenance_json")) return rc;
  return wrap([&] {
    try {
      json::parse(provenance_json);
    } catch (const json::exception& e) {
      throw llmfrac::UsageError(std::string("provenance is not valid JSON: ") + e.what());
    }
    model->model.provenance_json = provenance_json;
  });
}

int llmfrac_model_load(const char* path, llmfrac_model** out) {
  if (int rc = require(path && out, "path/out")) return rc;
  return wrap([&] {
    auto handle = std::make_unique<llmfrac_model>();
    handle->model = llmfrac::load_model(path);
    *out = handle.release();
  });
}

int llmfrac_model_info_json(const llmfrac_model* model, char** out_json) {
  if (int rc = require(model && out_json, "model/out_json")) return rc;
  return wrap([&] {
    const auto& m = model->model;
    json j;
    j["unit"] = llmfrac::to_string(m.unit);
    j["smoothing"] = m.smoothing;
    j["n_p"] = m.n_p;
    j["n_q"] = m.n_q;
    j["vocabulary_size"] = m.vocabulary.size();
    j["min_df"] = m.vocabulary.min_df;
    j["has_manifest"] = !m.training_ids.empty();
    *out_json = dup_string(j.dump());
  });
}

void llmfrac_model_free(llmfrac_model* model) { delete model; }

/* ---- estimation & analyses ---- */

int llmfrac_estimate(const llmfrac_model* model, const llmfrac_corpus* corpus, int64_t bootstrap_b,
                     uint64_t seed, char** out_json) {
  if (int rc = require(model && corpus && out_json, "model/corpus/out_json")) return rc;
  return wrap([&] {
    const llmfrac::Units units = llmfrac::make_units(corpus->corpus, model->model.unit);
    const llmfrac::MixtureEstimate est =
        llmfrac::estimate_with_ci(model->model, units, static_cast<int>(bootstrap_b), seed);
    json j = llmfrac::to_json(est);
    // vocabulary size travels with every estimate
    j["m_tokens"] = model->model.vocabulary.size();
    j["min_df"] = model->model.vocabulary.min_df;
    *out_json = dup_string(j.dump());
  });
}

int llmfrac_validate(const llmfrac_model* model, const llmfrac_corpus* human_heldout,
                     const llmfrac_corpus* llm_heldout, const double* alphas, int64_t n_alphas,
                     int64_t n, int64_t bootstrap_b, uint64_t seed, char** out_json) {
  if (int rc = require(model && human_heldout && llm_heldout && alphas && out_json,
                       "model/heldouts/alphas/out_json"))
    return rc;
  return wrap([&] {
    const llmfrac::ValidationReport report = llmfrac::run_sweep(
        model->model, human_heldout->corpus.sentences, llm_heldout->corpus.sentences,
        std::span<const double>(alphas, static_cast<std::size_t>(n_alphas)),
        static_cast<std::size_t>(n), static_cast<int>(bootstrap_b), seed);
    *out_json = dup_string(llmfrac::to_json(report).dump());
  });
}

int llmfrac_trend(const llmfrac_model* model, const llmfrac_corpus* corpus, int64_t min_bucket,
                  int64_t bootstrap_b, uint64_t seed, char** out_json) {
  if (int rc = require(model && corpus && out_json, "model/corpus/out_json")) return rc;
  return wrap([&] {
    const llmfrac::TrendSeries series =
        llmfrac::monthly_trend(model->model, corpus->corpus, static_cast<std::size_t>(min_bucket),
                               static_cast<int>(bootstrap_b), seed);
    *out_json = dup_string(llmfrac::to_json(series).dump());
  });
}

int llmfrac_stratify(const llmfrac_model* model, const llmfrac_corpus* corpus,
                     const char* predicate, double threshold, const char* metric, int nn_dedup,
                     int64_t min_bucket, int64_t bootstrap_b, uint64_t seed, char** out_json) {
  if (int rc = require(model && corpus && predicate && out_json, "model/corpus/predicate/out_json"))
    return rc;
  return wrap([&] {
    llmfrac::StrataOptions options;
    if (threshold >= 0) options.threshold = threshold;
    options.metric = llmfrac::nn_metric_from_string(metric ? metric : "cosine");
    options.nn_dedup = nn_dedup != 0;
    options.min_bucket = static_cast<std::size_t>(min_bucket);
    options.bootstrap_b = static_cast<int>(bootstrap_b);
    options.seed = seed;
    const llmfrac::StrataResult result = llmfrac::stratify(
        model->model, corpus->corpus, llmfrac::strata_predicate_from_string(predicate), options);
    *out_json = dup_string(llmfrac::to_json(result).dump());
  });
}

int llmfrac_wordshift(const llmfrac_model* model, int64_t top_k, char** out_json) {
  if (int rc = require(model && out_json, "model/out_json")) return rc;
  return wrap([&] {
    const llmfrac::WordShiftRanking ranking =
        llmfrac::log_odds_ranking(model->model, static_cast<std::size_t>(top_k));
    *out_json = dup_string(llmfrac::to_json(ranking).dump());
  });
}

int llmfrac_wordfreq(const llmfrac_corpus* corpus, const char* words, const char* bucket,
                     char** out_json) {
  if (int rc = require(corpus && words && out_json, "corpus/words/out_json")) return rc;
  return wrap([&] {
    std::vector<std::string> word_list;
    std::string current;
    for (const char* p = words;; ++p) {
      if (*p == ',' || *p == '\0') {
        if (!current.empty()) word_list.push_back(current);
        current.clear();
        if (*p == '\0') break;
      } else {
        current.push_back(*p);
      }
    }
    const std::string bucket_name = bucket ? bucket : "month";
    llmfrac::FrequencyBucket fb;
    if (bucket_name == "month") {
      fb = llmfrac::FrequencyBucket::month;
    } else if (bucket_name == "year") {
      fb = llmfrac::FrequencyBucket::year;
    } else {
      throw llmfrac::UsageError("unknown bucket '" + bucket_name + "' (expected month|year)");
    }
    const llmfrac::WordFrequencySeries series =
        llmfrac::word_frequency_series(corpus->corpus, word_list, fb);
    *out_json = dup_string(llmfrac::to_json(series).dump());
  });
}

/* ---- counterfactual generation ---- */

int llmfrac_generate(const char* in_path, const char* section_filter, const char* out_path,
                     const char* config_json, char** out_stats_json) {
  if (int rc = require(in_path && out_path, "in_path/out_path")) return rc;
  return wrap([&] {
    const llmfrac::GenPipeConfig cfg = parse_genpipe_config(config_json);
    llmfrac::Corpus input = llmfrac::load_corpus(
        in_path, llmfrac::section_filter_from_string(section_filter ? section_filter : "any"));
    const llmfrac::BatchStats stats = llmfrac::generate_batch(input, out_path, cfg);
    if (out_stats_json) *out_stats_json = dup_string(batch_stats_json(stats).dump());
  });
}

int llmfrac_proofread(const char* in_path, const char* section_filter, const char* out_path,
                      const char* config_json, char** out_stats_json) {
  if (int rc = require(in_path && out_path, "in_path/out_path")) return rc;
  return wrap([&] {
    const llmfrac::GenPipeConfig cfg = parse_genpipe_config(config_json);
    llmfrac::Corpus input = llmfrac::load_corpus(
        in_path, llmfrac::section_filter_from_string(section_filter ? section_filter : "any"));
    const llmfrac::BatchStats stats = llmfrac::proofread_batch(input, out_path, cfg);
    if (out_stats_json) *out_stats_json = dup_string(batch_stats_json(stats).dump());
  });
}

} /* extern "C" */
