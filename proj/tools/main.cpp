// llmfrac command-line tool. All estimation work happens behind the
// shared-library C API; this binary parses flags, assembles the
// provenance envelope, and renders JSON/CSV artifacts.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "llmfrac.h"

using nlohmann::json;

namespace {

struct Global {
  std::uint64_t seed = 0;
  int threads = 1;
  std::string format = "json";
};

struct CorpusHandle {
  llmfrac_corpus* ptr = nullptr;
  ~CorpusHandle() { llmfrac_corpus_free(ptr); }
};
struct VocabHandle {
  llmfrac_vocab* ptr = nullptr;
  ~VocabHandle() { llmfrac_vocab_free(ptr); }
};
struct ModelHandle {
  llmfrac_model* ptr = nullptr;
  ~ModelHandle() { llmfrac_model_free(ptr); }
};

struct OwnedString {
  char* ptr = nullptr;
  ~OwnedString() { llmfrac_string_free(ptr); }
  std::string str() const { return ptr ? std::string(ptr) : std::string(); }
};

[[noreturn]] void die(int status) {
  std::cerr << "error: " << llmfrac_last_error() << "\n";
  std::exit(status);
}

void check(int status) {
  if (status != LLMFRAC_OK) die(status);
}

std::string file_checksum(const std::string& path) {
  OwnedString hex;
  check(llmfrac_file_checksum(path.c_str(), &hex.ptr));
  return hex.str();
}

CorpusHandle load_corpus_checked(const std::string& path, const std::string& section,
                                 const char* label) {
  CorpusHandle corpus;
  check(llmfrac_corpus_load(path.c_str(), section.c_str(), &corpus.ptr));
  int64_t records = 0, sentences = 0, empty = 0;
  llmfrac_corpus_counts(corpus.ptr, &records, &sentences, &empty);
  std::cerr << label << ": " << records << " records, " << sentences << " sentences ("
            << empty << " with empty token sets) from " << path << "\n";
  return corpus;
}

// Every artifact embeds tool version, the resolved configuration and the
// checksums of its inputs. Worker-thread count is an execution detail,
// not provenance, and is deliberately not echoed: N threads and 1 thread
// must produce identical bytes.
json envelope(const Global& g, json config, const std::vector<std::string>& input_paths,
              json report) {
  json inputs = json::object();
  for (const auto& p : input_paths) inputs[p] = file_checksum(p);
  config["seed"] = g.seed;
  json j;
  j["tool_version"] = llmfrac_version();
  j["config"] = std::move(config);
  j["inputs"] = std::move(inputs);
  j["report"] = std::move(report);
  return j;
}

void write_artifact(const std::string& out_path, const std::string& content) {
  if (out_path.empty() || out_path == "-") {
    std::cout << content;
    if (!content.empty() && content.back() != '\n') std::cout << '\n';
    return;
  }
  std::ofstream out(out_path, std::ios::binary);
  if (!out) {
    std::cerr << "error: cannot open '" << out_path << "' for writing\n";
    std::exit(LLMFRAC_ERR_DATA);
  }
  out << content;
  if (!content.empty() && content.back() != '\n') out << '\n';
}

std::string num(const json& v) {
  if (v.is_null()) return "";
  return v.dump();
}

// CSV artifacts carry the envelope as leading comment lines.
std::string csv_preamble(const json& env) {
  std::string out = "# tool_version=" + env.at("tool_version").get<std::string>() + "\n";
  for (const auto& [k, v] : env.at("config").items())
    out += "# config." + k + "=" + (v.is_string() ? v.get<std::string>() : v.dump()) + "\n";
  for (const auto& [k, v] : env.at("inputs").items())
    out += "# input." + k + "=" + v.get<std::string>() + "\n";
  return out;
}

std::string trend_csv_rows(const json& series, const std::string& stratum) {
  std::string out;
  for (const auto& b : series.at("buckets")) {
    if (!stratum.empty()) out += stratum + ",";
    out += b.at("month").get<std::string>() + "," + num(b.at("alpha")) + "," +
           num(b.at("ci_low")) + "," + num(b.at("ci_high")) + "," + num(b.at("n")) + "," +
           (b.at("low_sample").get<bool>() ? "low_sample" : "") + "\n";
  }
  return out;
}

std::vector<double> parse_alpha_list(const std::string& text) {
  std::vector<double> alphas;
  std::string current;
  auto flush = [&] {
    if (current.empty()) return;
    try {
      alphas.push_back(std::stod(current));
    } catch (const std::exception&) {
      std::cerr << "error: bad alpha value '" << current << "'\n";
      std::exit(LLMFRAC_ERR_USAGE);
    }
    current.clear();
  };
  for (char c : text) {
    if (c == ',') {
      flush();
    } else {
      current.push_back(c);
    }
  }
  flush();
  return alphas;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Corpus-level estimation of the fraction of LLM-modified sentences"};
  app.require_subcommand(1);
  app.fallthrough(); // global flags may follow the subcommand name

  Global g;
  app.add_option("--seed", g.seed, "Seed for all randomness")->capture_default_str();
  app.add_option("--threads", g.threads, "Worker threads (results are thread-count invariant)")
      ->capture_default_str();
  app.add_option("--format", g.format, "Artifact format: json|csv")
      ->check(CLI::IsMember({"json", "csv"}))
      ->capture_default_str();
  app.set_config("--config", "", "Key=value config file; command-line flags win");

  // ---- fit ----
  auto* fit = app.add_subcommand("fit", "Fit an occurrence model from reference corpora");
  std::string fit_human, fit_llm, fit_section = "any", fit_vocab_list, fit_unit = "sentence",
              fit_out;
  std::int64_t fit_min_df = 3;
  double fit_smoothing = 1.0;
  bool fit_no_manifest = false;
  fit->add_option("--human", fit_human, "Human reference corpus (JSONL)")->required();
  fit->add_option("--llm", fit_llm, "LLM reference corpus (JSONL)")->required();
  fit->add_option("--section", fit_section, "Section filter: any|abstract|introduction")
      ->capture_default_str();
  fit->add_option("--min-df", fit_min_df, "Vocabulary document-frequency floor")
      ->capture_default_str();
  fit->add_option("--vocab-list", fit_vocab_list,
                  "External token list (overrides vocabulary construction)");
  fit->add_option("--smoothing", fit_smoothing, "Additive pseudo-count")->capture_default_str();
  fit->add_option("--unit", fit_unit, "Estimation unit: sentence|document")->capture_default_str();
  fit->add_flag("--no-manifest", fit_no_manifest,
                "Do not record training record ids in the model");
  fit->add_option("--out", fit_out, "Model file path")->required();

  // ---- estimate ----
  auto* estimate = app.add_subcommand("estimate", "Estimate alpha for a corpus");
  std::string est_model, est_corpus, est_section = "any", est_out;
  std::int64_t est_bootstrap = 1000;
  estimate->add_option("--model", est_model, "Model file")->required();
  estimate->add_option("--corpus", est_corpus, "Corpus to estimate (JSONL)")->required();
  estimate->add_option("--section", est_section, "Section filter")->capture_default_str();
  estimate->add_option("--bootstrap-b", est_bootstrap, "Bootstrap replicates (0 skips the CI)")
      ->capture_default_str();
  estimate->add_option("--out", est_out, "Artifact path (default stdout)");

  // ---- validate ----
  auto* validate = app.add_subcommand("validate", "Ground-truth calibration sweep");
  std::string val_model, val_human, val_llm, val_alphas = "0,0.05,0.1,0.15,0.2,0.25", val_out;
  std::int64_t val_n = 3000, val_bootstrap = 1000;
  validate->add_option("--model", val_model, "Model file")->required();
  validate->add_option("--human", val_human, "Held-out human corpus (JSONL)")->required();
  validate->add_option("--llm", val_llm, "Held-out LLM corpus (JSONL)")->required();
  validate->add_option("--alphas", val_alphas, "Comma-separated ground-truth alphas")
      ->capture_default_str();
  validate->add_option("--n", val_n, "Sentences per mixture")->capture_default_str();
  validate->add_option("--bootstrap-b", val_bootstrap, "Bootstrap replicates")
      ->capture_default_str();
  validate->add_option("--out", val_out, "Artifact path (default stdout)");

  // ---- trend ----
  auto* trend = app.add_subcommand("trend", "Monthly alpha estimates");
  std::string trend_model, trend_corpus, trend_section = "any", trend_out;
  std::int64_t trend_min_bucket = 200, trend_bootstrap = 1000;
  trend->add_option("--model", trend_model, "Model file")->required();
  trend->add_option("--corpus", trend_corpus, "Corpus (JSONL)")->required();
  trend->add_option("--section", trend_section, "Section filter")->capture_default_str();
  trend->add_option("--min-bucket", trend_min_bucket, "Low-sample flag threshold")
      ->capture_default_str();
  trend->add_option("--bootstrap-b", trend_bootstrap, "Bootstrap replicates")
      ->capture_default_str();
  trend->add_option("--out", trend_out, "Artifact path (default stdout)");

  // ---- stratify ----
  auto* stratify = app.add_subcommand("stratify", "Two-group stratified trend");
  std::string str_model, str_corpus, str_section = "any", str_predicate, str_metric = "cosine",
              str_embeddings, str_out;
  double str_threshold = -1;
  std::int64_t str_min_bucket = 200, str_bootstrap = 1000;
  bool str_carry_meta = false, str_nn_dedup = false;
  stratify->add_option("--model", str_model, "Model file")->required();
  stratify->add_option("--corpus", str_corpus, "Corpus (JSONL)")->required();
  stratify->add_option("--section", str_section, "Section filter")->capture_default_str();
  stratify
      ->add_option("--predicate", str_predicate,
                   "preprint_count | fulltext_words | nn_distance")
      ->required();
  stratify->add_option("--threshold", str_threshold,
                       "Split threshold (negative selects the default)")
      ->capture_default_str();
  stratify->add_option("--metric", str_metric, "nn_distance metric: cosine|euclidean")
      ->capture_default_str();
  stratify->add_flag("--nn-dedup", str_nn_dedup,
                     "Skip bit-identical embeddings in the nearest-neighbor search");
  stratify->add_option("--embeddings", str_embeddings, "Embeddings sidecar (JSONL keyed by id)");
  stratify->add_flag("--carry-author-meta", str_carry_meta,
                     "Fill missing preprint counts from the author's most recent earlier year");
  stratify->add_option("--min-bucket", str_min_bucket, "Low-sample flag threshold")
      ->capture_default_str();
  stratify->add_option("--bootstrap-b", str_bootstrap, "Bootstrap replicates")
      ->capture_default_str();
  stratify->add_option("--out", str_out, "Artifact path (default stdout)");

  // ---- wordshift ----
  auto* wordshift = app.add_subcommand("wordshift", "Log-odds token ranking");
  std::string ws_model, ws_freq_corpus, ws_words, ws_bucket = "month", ws_section = "any", ws_out;
  std::int64_t ws_top_k = 20;
  wordshift->add_option("--model", ws_model, "Model file")->required();
  wordshift->add_option("--top-k", ws_top_k, "Tokens to report")->capture_default_str();
  wordshift->add_option("--freq-corpus", ws_freq_corpus,
                        "Corpus for per-bucket frequency series (JSONL)");
  wordshift->add_option("--words", ws_words,
                        "Comma-separated words for the series (default: the top-k tokens)");
  wordshift->add_option("--bucket", ws_bucket, "Series bucket: month|year")->capture_default_str();
  wordshift->add_option("--section", ws_section, "Section filter for --freq-corpus")
      ->capture_default_str();
  wordshift->add_option("--out", ws_out, "Artifact path (default stdout)");

  // ---- generate / proofread ----
  auto add_transport_options = [](CLI::App* cmd, std::string& in, std::string& section,
                                  std::string& out, std::string& mode, std::string& fixtures,
                                  std::string& endpoint, std::string& model_name, double& rpm,
                                  int& in_flight, int& max_attempts, double& backoff,
                                  std::string& request_log, std::string& stats_out) {
    cmd->add_option("--in", in, "Input corpus (JSONL)")->required();
    cmd->add_option("--section", section, "Section filter")->capture_default_str();
    cmd->add_option("--out", out, "Output corpus (JSONL, append)")->required();
    cmd->add_option("--mode", mode, "Transport: live|record|replay")->capture_default_str();
    cmd->add_option("--fixtures", fixtures, "Fixture file (record/replay)");
    cmd->add_option("--endpoint", endpoint, "Chat-completion endpoint URL (live/record)");
    cmd->add_option("--model-name", model_name, "Upstream model name")->capture_default_str();
    cmd->add_option("--rpm", rpm, "Requests per minute (0 = unlimited)")->capture_default_str();
    cmd->add_option("--in-flight", in_flight, "Parallel requests")->capture_default_str();
    cmd->add_option("--max-attempts", max_attempts, "Retry budget per request")
        ->capture_default_str();
    cmd->add_option("--backoff", backoff, "Initial retry backoff seconds")->capture_default_str();
    cmd->add_option("--request-log", request_log, "JSONL log of parameter blocks");
    cmd->add_option("--stats-out", stats_out, "Stats artifact path (default stdout)");
  };

  auto* generate = app.add_subcommand("generate", "Two-stage counterfactual generation");
  std::string gen_in, gen_section = "any", gen_out, gen_mode = "replay", gen_fixtures,
              gen_endpoint, gen_model_name = "gpt-3.5-turbo-0125", gen_request_log, gen_stats_out,
              gen_cutoff = "2022-11-30";
  double gen_rpm = 0, gen_backoff = 0.5;
  int gen_in_flight = 1, gen_max_attempts = 5;
  add_transport_options(generate, gen_in, gen_section, gen_out, gen_mode, gen_fixtures,
                        gen_endpoint, gen_model_name, gen_rpm, gen_in_flight, gen_max_attempts,
                        gen_backoff, gen_request_log, gen_stats_out);
  generate->add_option("--cutoff", gen_cutoff,
                       "Skip records dated on/after this date (empty disables)")
      ->capture_default_str();

  auto* proofread = app.add_subcommand("proofread", "Proofread each sentence via the LLM");
  std::string pf_in, pf_section = "any", pf_out, pf_mode = "replay", pf_fixtures, pf_endpoint,
              pf_model_name = "gpt-3.5-turbo-0125", pf_request_log, pf_stats_out;
  double pf_rpm = 0, pf_backoff = 0.5;
  int pf_in_flight = 1, pf_max_attempts = 5;
  add_transport_options(proofread, pf_in, pf_section, pf_out, pf_mode, pf_fixtures, pf_endpoint,
                        pf_model_name, pf_rpm, pf_in_flight, pf_max_attempts, pf_backoff,
                        pf_request_log, pf_stats_out);

  // ---- segment ----
  auto* segment = app.add_subcommand("segment", "Dump preprocessed sentences for inspection");
  std::string seg_corpus, seg_section = "any", seg_out;
  segment->add_option("--corpus", seg_corpus, "Corpus (JSONL)")->required();
  segment->add_option("--section", seg_section, "Section filter")->capture_default_str();
  segment->add_option("--out", seg_out, "Artifact path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e); // prints the usage message
    return 1;    // all usage errors exit 1
  }

  check(llmfrac_set_threads(g.threads));

  if (*fit) {
    auto human = load_corpus_checked(fit_human, fit_section, "human");
    auto llm = load_corpus_checked(fit_llm, fit_section, "llm");
    VocabHandle vocab;
    if (!fit_vocab_list.empty()) {
      check(llmfrac_vocab_load_list(fit_vocab_list.c_str(), &vocab.ptr));
    } else {
      check(llmfrac_vocab_build(human.ptr, llm.ptr, fit_min_df, &vocab.ptr));
    }
    int64_t vocab_size = 0;
    llmfrac_vocab_size(vocab.ptr, &vocab_size);
    std::cerr << "vocabulary: " << vocab_size << " tokens\n";
    ModelHandle model;
    check(llmfrac_model_fit(human.ptr, llm.ptr, vocab.ptr, fit_smoothing, fit_unit.c_str(),
                            fit_no_manifest ? 0 : 1, &model.ptr));
    json config{{"human", fit_human}, {"llm", fit_llm}, {"section", fit_section},
                {"min_df", fit_min_df}, {"smoothing", fit_smoothing}, {"unit", fit_unit},
                {"manifest", !fit_no_manifest}};
    if (!fit_vocab_list.empty()) config["vocab_list"] = fit_vocab_list;
    std::vector<std::string> inputs{fit_human, fit_llm};
    if (!fit_vocab_list.empty()) inputs.push_back(fit_vocab_list);
    json provenance = envelope(g, config, inputs, json::object());
    provenance.erase("report");
    check(llmfrac_model_set_provenance(model.ptr, provenance.dump().c_str()));
    check(llmfrac_model_save(model.ptr, fit_out.c_str()));
    std::cerr << "model written to " << fit_out << "\n";
    return 0;
  }

  if (*estimate) {
    ModelHandle model;
    check(llmfrac_model_load(est_model.c_str(), &model.ptr));
    auto corpus = load_corpus_checked(est_corpus, est_section, "corpus");
    OwnedString report;
    check(llmfrac_estimate(model.ptr, corpus.ptr, est_bootstrap, g.seed, &report.ptr));
    const json payload = json::parse(report.str());
    json config{{"model", est_model}, {"corpus", est_corpus}, {"section", est_section},
                {"bootstrap_b", est_bootstrap}, {"format", g.format}};
    const json env = envelope(g, config, {est_model, est_corpus}, payload);
    if (g.format == "csv") {
      std::string csv = csv_preamble(env);
      csv += "alpha,ci_low,ci_high,n,n_skipped,loglik\n";
      csv += num(payload.at("alpha")) + "," + num(payload.at("ci_low")) + "," +
             num(payload.at("ci_high")) + "," + num(payload.at("n")) + "," +
             num(payload.at("n_skipped")) + "," + num(payload.at("loglik")) + "\n";
      write_artifact(est_out, csv);
    } else {
      write_artifact(est_out, env.dump(2));
    }
    std::cerr << "alpha=" << payload.at("alpha").dump() << " (n=" << payload.at("n").dump()
              << ")\n";
    return 0;
  }

  if (*validate) {
    ModelHandle model;
    check(llmfrac_model_load(val_model.c_str(), &model.ptr));
    auto human = load_corpus_checked(val_human, "any", "human held-out");
    auto llm = load_corpus_checked(val_llm, "any", "llm held-out");
    const std::vector<double> alphas = parse_alpha_list(val_alphas);
    OwnedString report;
    check(llmfrac_validate(model.ptr, human.ptr, llm.ptr, alphas.data(),
                           static_cast<int64_t>(alphas.size()), val_n, val_bootstrap, g.seed,
                           &report.ptr));
    const json payload = json::parse(report.str());
    if (!payload.at("manifest_checked").get<bool>())
      std::cerr << "warning: model has no training-id manifest; split check skipped\n";
    json config{{"model", val_model}, {"human", val_human}, {"llm", val_llm},
                {"alphas", val_alphas}, {"n", val_n}, {"bootstrap_b", val_bootstrap},
                {"format", g.format}};
    const json env = envelope(g, config, {val_model, val_human, val_llm}, payload);
    if (g.format == "csv") {
      std::string csv = csv_preamble(env);
      csv += "alpha_true,alpha_est,ci_low,ci_high,n\n";
      for (const auto& p : payload.at("points")) {
        if (p.at("ok").get<bool>()) {
          csv += num(p.at("alpha_true")) + "," + num(p.at("alpha_est")) + "," +
                 num(p.at("ci_low")) + "," + num(p.at("ci_high")) + "," + num(p.at("n")) + "\n";
        } else {
          csv += num(p.at("alpha_true")) + ",,,,\n";
        }
      }
      write_artifact(val_out, csv);
    } else {
      write_artifact(val_out, env.dump(2));
    }
    std::cerr << "max_abs_error=" << payload.at("max_abs_error").dump() << "\n";
    return 0;
  }

  if (*trend) {
    ModelHandle model;
    check(llmfrac_model_load(trend_model.c_str(), &model.ptr));
    auto corpus = load_corpus_checked(trend_corpus, trend_section, "corpus");
    OwnedString report;
    check(llmfrac_trend(model.ptr, corpus.ptr, trend_min_bucket, trend_bootstrap, g.seed,
                        &report.ptr));
    const json payload = json::parse(report.str());
    json config{{"model", trend_model}, {"corpus", trend_corpus}, {"section", trend_section},
                {"min_bucket", trend_min_bucket}, {"bootstrap_b", trend_bootstrap},
                {"format", g.format}};
    const json env = envelope(g, config, {trend_model, trend_corpus}, payload);
    if (g.format == "csv") {
      std::string csv = csv_preamble(env);
      csv += "month,alpha,ci_low,ci_high,n,flag\n";
      csv += trend_csv_rows(payload, "");
      write_artifact(trend_out, csv);
    } else {
      write_artifact(trend_out, env.dump(2));
    }
    std::cerr << payload.at("buckets").size() << " month buckets\n";
    for (const auto& failed : payload.at("failed_months"))
      std::cerr << "warning: month " << failed.at("month").get<std::string>()
                << " skipped: " << failed.at("error").get<std::string>() << "\n";
    return 0;
  }

  if (*stratify) {
    ModelHandle model;
    check(llmfrac_model_load(str_model.c_str(), &model.ptr));
    auto corpus = load_corpus_checked(str_corpus, str_section, "corpus");
    if (!str_embeddings.empty()) {
      int64_t attached = 0, unmatched = 0;
      check(llmfrac_corpus_load_embeddings(corpus.ptr, str_embeddings.c_str(), &attached,
                                           &unmatched));
      std::cerr << "embeddings: " << attached << " attached, " << unmatched << " unmatched ids\n";
    }
    if (str_carry_meta) {
      int64_t filled = 0;
      check(llmfrac_corpus_carry_author_meta(corpus.ptr, &filled));
      std::cerr << "carry-forward filled preprint counts for " << filled << " records\n";
    }
    OwnedString report;
    check(llmfrac_stratify(model.ptr, corpus.ptr, str_predicate.c_str(), str_threshold,
                           str_metric.c_str(), str_nn_dedup ? 1 : 0, str_min_bucket,
                           str_bootstrap, g.seed, &report.ptr));
    const json payload = json::parse(report.str());
    json config{{"model", str_model}, {"corpus", str_corpus}, {"section", str_section},
                {"predicate", str_predicate}, {"threshold", str_threshold},
                {"metric", str_metric}, {"nn_dedup", str_nn_dedup},
                {"min_bucket", str_min_bucket}, {"bootstrap_b", str_bootstrap},
                {"carry_author_meta", str_carry_meta}, {"format", g.format}};
    std::vector<std::string> inputs{str_model, str_corpus};
    if (!str_embeddings.empty()) {
      inputs.push_back(str_embeddings);
      config["embeddings"] = str_embeddings;
    }
    const json env = envelope(g, config, inputs, payload);
    if (g.format == "csv") {
      std::string csv = csv_preamble(env);
      csv += "stratum,month,alpha,ci_low,ci_high,n,flag\n";
      csv += trend_csv_rows(payload.at("series_a"), payload.at("label_a").get<std::string>());
      csv += trend_csv_rows(payload.at("series_b"), payload.at("label_b").get<std::string>());
      write_artifact(str_out, csv);
    } else {
      write_artifact(str_out, env.dump(2));
    }
    std::cerr << "strata: " << payload.at("label_a").get<std::string>() << " / "
              << payload.at("label_b").get<std::string>() << " (excluded "
              << payload.at("excluded").dump() << ")\n";
    return 0;
  }

  if (*wordshift) {
    ModelHandle model;
    check(llmfrac_model_load(ws_model.c_str(), &model.ptr));
    OwnedString ranking;
    check(llmfrac_wordshift(model.ptr, ws_top_k, &ranking.ptr));
    json payload = json::parse(ranking.str());
    std::vector<std::string> inputs{ws_model};
    json config{{"model", ws_model}, {"top_k", ws_top_k}, {"format", g.format}};
    if (!ws_freq_corpus.empty()) {
      auto corpus = load_corpus_checked(ws_freq_corpus, ws_section, "corpus");
      std::string words = ws_words;
      if (words.empty()) {
        for (const auto& r : payload.at("ranked")) {
          if (!words.empty()) words += ",";
          words += r.at("token").get<std::string>();
        }
      }
      OwnedString series;
      check(llmfrac_wordfreq(corpus.ptr, words.c_str(), ws_bucket.c_str(), &series.ptr));
      payload["frequency_series"] = json::parse(series.str());
      inputs.push_back(ws_freq_corpus);
      config["freq_corpus"] = ws_freq_corpus;
      config["words"] = words;
      config["bucket"] = ws_bucket;
    }
    const json env = envelope(g, config, inputs, payload);
    if (g.format == "csv") {
      std::string csv = csv_preamble(env);
      if (payload.contains("frequency_series")) {
        csv += "bucket,word,sentence_fraction,record_fraction\n";
        const auto& series = payload.at("frequency_series");
        for (const auto& b : series.at("buckets")) {
          for (const auto& [word, frac] : b.at("words").items()) {
            csv += b.at("bucket").get<std::string>() + "," + word + "," +
                   num(frac.at("sentence_fraction")) + "," + num(frac.at("record_fraction")) +
                   "\n";
          }
        }
      } else {
        csv += "rank,token,log_odds_ratio\n";
        int rank = 1;
        for (const auto& r : payload.at("ranked")) {
          csv += std::to_string(rank++) + "," + r.at("token").get<std::string>() + "," +
                 num(r.at("log_odds_ratio")) + "\n";
        }
      }
      write_artifact(ws_out, csv);
    } else {
      write_artifact(ws_out, env.dump(2));
    }
    return 0;
  }

  auto genpipe_config = [&](const std::string& mode, const std::string& endpoint,
                            const std::string& model_name, const std::string& fixtures,
                            double rpm, int in_flight, int max_attempts, double backoff,
                            const std::string& request_log, const std::string& cutoff) {
    json cfg;
    cfg["mode"] = mode;
    if (!endpoint.empty()) cfg["endpoint"] = endpoint;
    cfg["model"] = model_name;
    if (!fixtures.empty()) cfg["fixtures"] = fixtures;
    cfg["rpm"] = rpm;
    cfg["max_in_flight"] = in_flight;
    cfg["max_attempts"] = max_attempts;
    cfg["backoff_initial_seconds"] = backoff;
    if (!request_log.empty()) cfg["request_log"] = request_log;
    cfg["cutoff_date"] = cutoff;
    cfg["api_key_env"] = "LLMFRAC_API_KEY";
    return cfg;
  };

  if (*generate) {
    const json cfg = genpipe_config(gen_mode, gen_endpoint, gen_model_name, gen_fixtures, gen_rpm,
                                    gen_in_flight, gen_max_attempts, gen_backoff, gen_request_log,
                                    gen_cutoff);
    OwnedString stats;
    const int rc = llmfrac_generate(gen_in.c_str(), gen_section.c_str(), gen_out.c_str(),
                                    cfg.dump().c_str(), &stats.ptr);
    if (rc != LLMFRAC_OK) die(rc);
    const json payload = json::parse(stats.str());
    json config = cfg;
    config["in"] = gen_in;
    config["out"] = gen_out;
    config["section"] = gen_section;
    config["format"] = g.format;
    const json env = envelope(g, config, {gen_in}, payload);
    write_artifact(gen_stats_out, env.dump(2));
    std::cerr << "generated " << payload.at("completed").dump() << "/" << payload.at("total").dump()
              << " records (failed " << payload.at("failed").dump() << ")\n";
    return payload.at("failed").get<int64_t>() > 0 ? LLMFRAC_ERR_TRANSPORT : 0;
  }

  if (*proofread) {
    const json cfg = genpipe_config(pf_mode, pf_endpoint, pf_model_name, pf_fixtures, pf_rpm,
                                    pf_in_flight, pf_max_attempts, pf_backoff, pf_request_log,
                                    /*cutoff=*/"");
    OwnedString stats;
    const int rc = llmfrac_proofread(pf_in.c_str(), pf_section.c_str(), pf_out.c_str(),
                                     cfg.dump().c_str(), &stats.ptr);
    if (rc != LLMFRAC_OK) die(rc);
    const json payload = json::parse(stats.str());
    json config = cfg;
    config["in"] = pf_in;
    config["out"] = pf_out;
    config["section"] = pf_section;
    config["format"] = g.format;
    const json env = envelope(g, config, {pf_in}, payload);
    write_artifact(pf_stats_out, env.dump(2));
    std::cerr << "proofread " << payload.at("completed").dump() << "/" << payload.at("total").dump()
              << " records (failed " << payload.at("failed").dump() << ")\n";
    return payload.at("failed").get<int64_t>() > 0 ? LLMFRAC_ERR_TRANSPORT : 0;
  }

  if (*segment) {
    auto corpus = load_corpus_checked(seg_corpus, seg_section, "corpus");
    OwnedString dump;
    check(llmfrac_corpus_segment_dump(corpus.ptr, &dump.ptr));
    json header = envelope(g, json{{"corpus", seg_corpus}, {"section", seg_section},
                                   {"format", g.format}},
                           {seg_corpus}, json::object());
    header.erase("report");
    if (g.format == "csv") {
      std::string csv = csv_preamble(header);
      csv += "parent_id,index,n_tokens,raw\n";
      std::istringstream lines(dump.str());
      std::string line;
      while (std::getline(lines, line)) {
        if (line.empty()) continue;
        const json s = json::parse(line);
        std::string raw = s.at("raw").get<std::string>();
        for (auto& c : raw) {
          if (c == ',') c = ' '; // keep the csv single-valued
        }
        csv += s.at("parent_id").get<std::string>() + "," + num(s.at("index")) + "," +
               std::to_string(s.at("tokens").size()) + "," + raw + "\n";
      }
      write_artifact(seg_out, csv);
    } else {
      // first line carries the provenance header; sentences follow 1/line
      write_artifact(seg_out, json{{"header", header}}.dump() + "\n" + dump.str());
    }
    return 0;
  }

  return 0;
}
