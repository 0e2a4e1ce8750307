// Drives the built llmfrac binary end to end.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "genpipe.hpp"
#include "prompts.hpp"
#include "rng.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    static std::atomic<int> counter{0};
    path = fs::temp_directory_path() /
           ("llmfrac_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

struct RunResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

RunResult run_cli(const std::string& args, const TempDir& dir) {
  const std::string out_path = dir.file("stdout.txt");
  const std::string err_path = dir.file("stderr.txt");
  const std::string cmd =
      std::string(LLMFRAC_CLI_PATH) + " " + args + " >" + out_path + " 2>" + err_path;
  const int raw = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  r.out = read_file(out_path);
  r.err = read_file(err_path);
  return r;
}

void write_reference_corpus(const std::string& path, bool llm_side, std::size_t n,
                            std::uint64_t seed, const std::string& month = "2020-03",
                            const std::string& id_prefix = "") {
  llmfrac::Rng rng(seed);
  std::ofstream out(path, std::ios::binary);
  for (std::size_t i = 0; i < n; ++i) {
    std::string text = "The study";
    for (int w = 0; w < 12; ++w) {
      const double lean = rng.real();
      if (llm_side ? lean < 0.7 : lean < 0.3) {
        text += " gam" + std::to_string(rng.bounded(30));
      } else {
        text += " alp" + std::to_string(rng.bounded(30));
      }
    }
    text += " ends here.";
    json j;
    j["id"] = id_prefix + (llm_side ? "l" : "h") + std::to_string(i);
    j["date"] = month + "-15";
    j["venue"] = "arxiv.cs";
    j["section"] = "abstract";
    j["text"] = text;
    out << j.dump() << "\n";
  }
}

std::string q(const std::string& s) { return "'" + s + "'"; }

} // namespace

TEST_CASE("cli fit/estimate flow with provenance envelope") {
  TempDir dir;
  write_reference_corpus(dir.file("human.jsonl"), false, 600, 1);
  write_reference_corpus(dir.file("llm.jsonl"), true, 600, 2);
  write_reference_corpus(dir.file("target.jsonl"), true, 200, 3);

  const RunResult fit = run_cli("fit --human " + q(dir.file("human.jsonl")) + " --llm " +
                                    q(dir.file("llm.jsonl")) + " --out " + q(dir.file("model.json")),
                                dir);
  REQUIRE(fit.exit_code == 0);
  CHECK(fit.err.find("model written") != std::string::npos);

  const RunResult est = run_cli("--seed 5 estimate --model " + q(dir.file("model.json")) +
                                    " --corpus " + q(dir.file("target.jsonl")) +
                                    " --bootstrap-b 150 --out " + q(dir.file("est.json")),
                                dir);
  REQUIRE(est.exit_code == 0);
  const json artifact = json::parse(read_file(dir.file("est.json")));
  CHECK(artifact.at("tool_version") == "0.1.0");
  CHECK(artifact.at("config").at("seed") == 5);
  CHECK(artifact.at("inputs").size() == 2);
  for (const auto& [path, checksum] : artifact.at("inputs").items())
    CHECK(checksum.get<std::string>().size() == 16);
  const double alpha = artifact.at("report").at("alpha").get<double>();
  CHECK(alpha > 0.8); // pure LLM-side corpus
  CHECK(artifact.at("report").at("ci_low").get<double>() <= alpha);
}

TEST_CASE("cli exit codes: usage 1, data 2") {
  TempDir dir;
  const RunResult usage = run_cli("estimate --definitely-not-a-flag", dir);
  CHECK(usage.exit_code == 1);

  const RunResult missing_sub = run_cli("", dir);
  CHECK(missing_sub.exit_code == 1);

  std::ofstream(dir.file("empty.jsonl"), std::ios::binary).close();
  write_reference_corpus(dir.file("llm.jsonl"), true, 50, 2);
  const RunResult data = run_cli("fit --human " + q(dir.file("empty.jsonl")) + " --llm " +
                                     q(dir.file("llm.jsonl")) + " --out " + q(dir.file("m.json")),
                                 dir);
  CHECK(data.exit_code == 2);
  CHECK(data.err.find("error:") != std::string::npos);

  std::ofstream bad(dir.file("bad_model.json"), std::ios::binary);
  bad << "{\"format_version\":1,\"truncated\":";
  bad.close();
  write_reference_corpus(dir.file("c.jsonl"), false, 20, 9);
  const RunResult corrupt = run_cli("estimate --model " + q(dir.file("bad_model.json")) +
                                        " --corpus " + q(dir.file("c.jsonl")),
                                    dir);
  CHECK(corrupt.exit_code == 2);
}

TEST_CASE("cli validate reproduces the six-point sweep shape") {
  TempDir dir;
  write_reference_corpus(dir.file("human.jsonl"), false, 700, 11);
  write_reference_corpus(dir.file("llm.jsonl"), true, 700, 12);
  // held-out pools carry fresh record ids; the manifest check refuses overlaps
  write_reference_corpus(dir.file("human_held.jsonl"), false, 900, 13, "2022-03", "held_");
  write_reference_corpus(dir.file("llm_held.jsonl"), true, 500, 14, "2022-03", "held_");

  REQUIRE(run_cli("fit --human " + q(dir.file("human.jsonl")) + " --llm " +
                      q(dir.file("llm.jsonl")) + " --out " + q(dir.file("model.json")),
                  dir)
              .exit_code == 0);

  const RunResult val = run_cli(
      "--seed 3 validate --model " + q(dir.file("model.json")) + " --human " +
          q(dir.file("human_held.jsonl")) + " --llm " + q(dir.file("llm_held.jsonl")) +
          " --alphas 0,0.05,0.1,0.15,0.2,0.25 --n 800 --bootstrap-b 0 --out " +
          q(dir.file("report.json")),
      dir);
  REQUIRE(val.exit_code == 0);
  const json artifact = json::parse(read_file(dir.file("report.json")));
  REQUIRE(artifact.at("report").at("points").size() == 6);
  CHECK(artifact.at("report").at("points")[0].at("alpha_true") == 0.0);
  CHECK(artifact.at("report").at("points")[5].at("alpha_true") == 0.25);
  CHECK(artifact.at("report").at("max_abs_error").get<double>() <= 0.05);
  // model has a manifest recorded by default and the held-outs are fresh ids
  CHECK(artifact.at("report").at("manifest_checked") == true);

  SUBCASE("csv format carries the documented columns") {
    const RunResult csv = run_cli(
        "--seed 3 --format csv validate --model " + q(dir.file("model.json")) + " --human " +
            q(dir.file("human_held.jsonl")) + " --llm " + q(dir.file("llm_held.jsonl")) +
            " --alphas 0,0.1 --n 400 --bootstrap-b 0 --out " + q(dir.file("report.csv")),
        dir);
    REQUIRE(csv.exit_code == 0);
    const std::string text = read_file(dir.file("report.csv"));
    CHECK(text.find("alpha_true,alpha_est,ci_low,ci_high,n") != std::string::npos);
    CHECK(text.find("# tool_version=") != std::string::npos);
  }
}

TEST_CASE("cli segment dumps preprocessing as JSONL") {
  TempDir dir;
  std::ofstream out(dir.file("c.jsonl"), std::ios::binary);
  out << R"({"id":"a1","date":"2020-01-15","venue":"v","section":"abstract","text":"We study X. We find Y."})"
      << "\n";
  out.close();
  const RunResult seg = run_cli("segment --corpus " + q(dir.file("c.jsonl")), dir);
  REQUIRE(seg.exit_code == 0);
  std::istringstream lines(seg.out);
  std::string line;
  std::vector<json> parsed;
  while (std::getline(lines, line)) {
    if (!line.empty()) parsed.push_back(json::parse(line));
  }
  REQUIRE(parsed.size() == 3); // provenance header + two sentences
  CHECK(parsed[0].contains("header"));
  CHECK(parsed[0].at("header").at("tool_version") == "0.1.0");
  CHECK(parsed[1].at("raw") == "we study x.");
  CHECK(parsed[2].at("index") == 1);
}

TEST_CASE("cli artifacts are byte-identical across runs and thread counts") {
  TempDir dir;
  write_reference_corpus(dir.file("human.jsonl"), false, 500, 21);
  write_reference_corpus(dir.file("llm.jsonl"), true, 500, 22);
  write_reference_corpus(dir.file("target.jsonl"), true, 300, 23);
  REQUIRE(run_cli("fit --human " + q(dir.file("human.jsonl")) + " --llm " +
                      q(dir.file("llm.jsonl")) + " --out " + q(dir.file("model.json")),
                  dir)
              .exit_code == 0);

  const std::string base = "--seed 9 estimate --model " + q(dir.file("model.json")) +
                           " --corpus " + q(dir.file("target.jsonl")) + " --bootstrap-b 200 --out ";
  REQUIRE(run_cli(base + q(dir.file("e1.json")), dir).exit_code == 0);
  REQUIRE(run_cli(base + q(dir.file("e2.json")), dir).exit_code == 0);
  REQUIRE(run_cli("--threads 2 " + base + q(dir.file("e3.json")), dir).exit_code == 0);

  const std::string a = read_file(dir.file("e1.json"));
  CHECK(a == read_file(dir.file("e2.json")));
  // thread count must not leak into the artifact
  CHECK(a == read_file(dir.file("e3.json")));
}

TEST_CASE("cli generate and proofread replay fixtures deterministically") {
  TempDir dir;
  // input corpus
  {
    std::ofstream out(dir.file("in.jsonl"), std::ios::binary);
    for (int i = 0; i < 4; ++i) {
      json j;
      j["id"] = "p" + std::to_string(i);
      j["date"] = "2020-01-15";
      j["venue"] = "arxiv.cs";
      j["section"] = "abstract";
      j["text"] = "Paragraph " + std::to_string(i) + " body. It has two sentences.";
      out << j.dump() << "\n";
    }
  }
  // mint fixtures via the core (the CLI will replay them)
  {
    class Scripted : public llmfrac::CompletionTransport {
    public:
      std::string complete(const llmfrac::CompletionRequest& req) override {
        if (req.instruction == llmfrac::prompts::kSummarizeToOutline)
          return "- bullet for " + req.user_text.substr(0, 11);
        if (req.instruction == llmfrac::prompts::kExpandOutline)
          return "Expansion of " + req.user_text;
        return "clean " + req.user_text;
      }
    };
    llmfrac::CompletionClient recorder(std::make_shared<llmfrac::RecordTransport>(
        std::make_unique<Scripted>(), dir.file("fixtures.jsonl")));
    for (int i = 0; i < 4; ++i) {
      const std::string paragraph =
          "Paragraph " + std::to_string(i) + " body. It has two sentences.";
      const std::string outline = llmfrac::summarize_to_outline(paragraph, recorder);
      llmfrac::expand_outline(outline, recorder);
    }
    // proofread fixtures for each normalized sentence
    for (int i = 0; i < 4; ++i) {
      llmfrac::proofread_sentence("paragraph " + std::to_string(i) + " body.", recorder);
      llmfrac::proofread_sentence("it has two sentences.", recorder);
    }
  }

  const std::string gen_args = "generate --in " + q(dir.file("in.jsonl")) + " --mode replay" +
                               " --fixtures " + q(dir.file("fixtures.jsonl")) +
                               " --request-log " + q(dir.file("req.jsonl")) + " --out ";
  const RunResult g1 = run_cli(gen_args + q(dir.file("gen1.jsonl")) + " --stats-out " +
                                   q(dir.file("stats1.json")),
                               dir);
  REQUIRE(g1.exit_code == 0);
  const RunResult g2 = run_cli(gen_args + q(dir.file("gen2.jsonl")) + " --stats-out " +
                                   q(dir.file("stats2.json")),
                               dir);
  REQUIRE(g2.exit_code == 0);
  CHECK(read_file(dir.file("gen1.jsonl")) == read_file(dir.file("gen2.jsonl")));
  CHECK(!read_file(dir.file("gen1.jsonl")).empty());

  // every request parameter block logged equals the defaults
  std::istringstream log_lines(read_file(dir.file("req.jsonl")));
  std::string line;
  int logged = 0;
  while (std::getline(log_lines, line)) {
    if (line.empty()) continue;
    const json r = json::parse(line);
    CHECK(r.at("temperature") == 1.0);
    CHECK(r.at("max_tokens") == 2048);
    CHECK(r.at("top_p") == 1.0);
    CHECK(r.at("frequency_penalty") == 0.0);
    CHECK(r.at("presence_penalty") == 0.0);
    ++logged;
  }
  CHECK(logged == 8); // two stages x four records

  const json stats = json::parse(read_file(dir.file("stats1.json")));
  CHECK(stats.at("report").at("completed") == 4);

  const RunResult pf = run_cli("proofread --in " + q(dir.file("in.jsonl")) + " --mode replay" +
                                   " --fixtures " + q(dir.file("fixtures.jsonl")) + " --out " +
                                   q(dir.file("proof.jsonl")) + " --stats-out " +
                                   q(dir.file("pstats.json")),
                               dir);
  REQUIRE(pf.exit_code == 0);
  std::istringstream proof_lines(read_file(dir.file("proof.jsonl")));
  int proof_count = 0;
  while (std::getline(proof_lines, line)) proof_count += !line.empty();
  CHECK(proof_count == 4); // 1:1 with input records

  // missing fixtures exit with the transport code
  const RunResult broken = run_cli("generate --in " + q(dir.file("in.jsonl")) +
                                       " --mode replay --fixtures " + q(dir.file("nope.jsonl")) +
                                       " --out " + q(dir.file("x.jsonl")),
                                   dir);
  CHECK(broken.exit_code == 2); // fixtures file absent is a data error
}

TEST_CASE("cli config file supplies defaults, flags win") {
  TempDir dir;
  write_reference_corpus(dir.file("human.jsonl"), false, 300, 31);
  write_reference_corpus(dir.file("llm.jsonl"), true, 300, 32);
  {
    std::ofstream cfg(dir.file("llmfrac.conf"), std::ios::binary);
    cfg << "seed=77\n";
  }
  REQUIRE(run_cli("fit --human " + q(dir.file("human.jsonl")) + " --llm " +
                      q(dir.file("llm.jsonl")) + " --out " + q(dir.file("model.json")),
                  dir)
              .exit_code == 0);
  write_reference_corpus(dir.file("t.jsonl"), true, 100, 33);

  const RunResult from_config =
      run_cli("--config " + q(dir.file("llmfrac.conf")) + " estimate --model " +
                  q(dir.file("model.json")) + " --corpus " + q(dir.file("t.jsonl")) +
                  " --bootstrap-b 0 --out " + q(dir.file("a.json")),
              dir);
  REQUIRE(from_config.exit_code == 0);
  CHECK(json::parse(read_file(dir.file("a.json"))).at("config").at("seed") == 77);

  const RunResult flag_wins =
      run_cli("--config " + q(dir.file("llmfrac.conf")) + " --seed 5 estimate --model " +
                  q(dir.file("model.json")) + " --corpus " + q(dir.file("t.jsonl")) +
                  " --bootstrap-b 0 --out " + q(dir.file("b.json")),
              dir);
  REQUIRE(flag_wins.exit_code == 0);
  CHECK(json::parse(read_file(dir.file("b.json"))).at("config").at("seed") == 5);
}

TEST_CASE("cli trend and wordshift produce plot-ready csv") {
  TempDir dir;
  write_reference_corpus(dir.file("human.jsonl"), false, 500, 41);
  write_reference_corpus(dir.file("llm.jsonl"), true, 500, 42);
  REQUIRE(run_cli("fit --human " + q(dir.file("human.jsonl")) + " --llm " +
                      q(dir.file("llm.jsonl")) + " --out " + q(dir.file("model.json")),
                  dir)
              .exit_code == 0);

  // two months of data
  {
    std::ofstream out(dir.file("t.jsonl"), std::ios::binary);
    llmfrac::Rng rng(43);
    for (int i = 0; i < 400; ++i) {
      json j;
      j["id"] = "t" + std::to_string(i);
      j["date"] = (i < 200 ? "2023-01-10" : "2023-02-10");
      j["venue"] = "arxiv.cs";
      j["section"] = "abstract";
      std::string text = "The study";
      for (int w = 0; w < 12; ++w) {
        text += (rng.real() < 0.4 ? " gam" : " alp") + std::to_string(rng.bounded(30));
      }
      j["text"] = text + " ends here.";
      out << j.dump() << "\n";
    }
  }
  const RunResult trend = run_cli("--format csv --seed 2 trend --model " +
                                      q(dir.file("model.json")) + " --corpus " +
                                      q(dir.file("t.jsonl")) +
                                      " --bootstrap-b 100 --min-bucket 150 --out " +
                                      q(dir.file("trend.csv")),
                                  dir);
  REQUIRE(trend.exit_code == 0);
  const std::string csv = read_file(dir.file("trend.csv"));
  CHECK(csv.find("month,alpha,ci_low,ci_high,n,flag") != std::string::npos);
  CHECK(csv.find("2023-01,") != std::string::npos);
  CHECK(csv.find("2023-02,") != std::string::npos);

  const RunResult ws = run_cli("--format csv wordshift --model " + q(dir.file("model.json")) +
                                   " --top-k 5 --out " + q(dir.file("ws.csv")),
                               dir);
  REQUIRE(ws.exit_code == 0);
  const std::string ws_csv = read_file(dir.file("ws.csv"));
  CHECK(ws_csv.find("rank,token,log_odds_ratio") != std::string::npos);
  CHECK(ws_csv.find("gam") != std::string::npos); // LLM-leaning family ranks up
}
