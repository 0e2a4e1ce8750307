#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "errors.hpp"
#include "model.hpp"
#include "rng.hpp"

using namespace llmfrac;
namespace fs = std::filesystem;

namespace {

SentenceRecord sentence(std::vector<std::string> tokens) {
  SentenceRecord s;
  std::sort(tokens.begin(), tokens.end());
  s.tokens = std::move(tokens);
  return s;
}

Vocabulary vocab_of(std::vector<std::string> tokens) {
  Vocabulary v;
  std::sort(tokens.begin(), tokens.end());
  v.tokens = std::move(tokens);
  v.min_df = 1;
  return v;
}

std::vector<SentenceRecord> random_sentences(Rng& rng, const std::vector<std::string>& pool,
                                             std::size_t n) {
  std::vector<SentenceRecord> out;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::string> toks;
    const std::size_t k = rng.bounded(6);
    for (std::size_t j = 0; j < k; ++j) toks.push_back(pool[rng.bounded(pool.size())]);
    std::sort(toks.begin(), toks.end());
    toks.erase(std::unique(toks.begin(), toks.end()), toks.end());
    out.push_back(sentence(toks));
  }
  return out;
}

} // namespace

TEST_CASE("fit counts occurrences and smoothing keeps probabilities interior") {
  const std::vector<SentenceRecord> human = {sentence({"a"}), sentence({"a", "b"})};
  const std::vector<SentenceRecord> llm = {sentence({"b"})};
  const Vocabulary v = vocab_of({"a", "b"});
  const FitResult fit = fit_model(make_units(std::span<const SentenceRecord>(human)),
                                  make_units(std::span<const SentenceRecord>(llm)), v, 1.0,
                                  Unit::sentence);
  const OccurrenceModel& m = fit.model;
  CHECK(m.n_p == 2);
  CHECK(m.n_q == 1);
  CHECK(m.occ_p == std::vector<std::int64_t>{2, 1});
  CHECK(m.occ_q == std::vector<std::int64_t>{0, 1});
  CHECK(m.p(0) == doctest::Approx(0.75).epsilon(1e-15));            // (2+1)/(2+2)
  CHECK(m.q(0) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));       // (0+1)/(1+2)
}

TEST_CASE("a token present in every sentence still has p < 1") {
  std::vector<SentenceRecord> human;
  for (int i = 0; i < 50; ++i) human.push_back(sentence({"always", i % 2 ? "x1" : "x2"}));
  const std::vector<SentenceRecord> llm = {sentence({"always"})};
  const Vocabulary v = vocab_of({"always", "x1", "x2"});
  const OccurrenceModel m = fit_model(make_units(std::span<const SentenceRecord>(human)),
                                      make_units(std::span<const SentenceRecord>(llm)), v, 1.0,
                                      Unit::sentence)
                                .model;
  const std::size_t idx =
      std::lower_bound(m.vocabulary.tokens.begin(), m.vocabulary.tokens.end(), "always") -
      m.vocabulary.tokens.begin();
  CHECK(m.occ_p[idx] == 50);
  CHECK(m.p(idx) == doctest::Approx(51.0 / 52.0));
  CHECK(m.p(idx) < 1.0);
  for (std::size_t t = 0; t < m.vocabulary.size(); ++t) {
    CHECK(m.p(t) > 0.0);
    CHECK(m.p(t) < 1.0);
    CHECK(m.q(t) > 0.0);
    CHECK(m.q(t) < 1.0);
  }
}

TEST_CASE("fit matches a brute-force recount on a 3000-sentence pair") {
  Rng rng(41);
  std::vector<std::string> pool;
  for (int i = 0; i < 80; ++i) pool.push_back("tok" + std::to_string(i));
  const auto human = random_sentences(rng, pool, 3000);
  const auto llm = random_sentences(rng, pool, 3000);
  Vocabulary v = vocab_of(pool);
  const OccurrenceModel m = fit_model(make_units(std::span<const SentenceRecord>(human)),
                                      make_units(std::span<const SentenceRecord>(llm)), v, 1.0,
                                      Unit::sentence)
                                .model;
  // oracle: naive double loop over sentences x vocabulary
  for (std::size_t t = 0; t < v.tokens.size(); ++t) {
    std::int64_t cp = 0, cq = 0;
    for (const auto& s : human) {
      cp += std::find(s.tokens.begin(), s.tokens.end(), v.tokens[t]) != s.tokens.end();
    }
    for (const auto& s : llm) {
      cq += std::find(s.tokens.begin(), s.tokens.end(), v.tokens[t]) != s.tokens.end();
    }
    CHECK(m.occ_p[t] == cp);
    CHECK(m.occ_q[t] == cq);
  }
}

TEST_CASE("fit rejects empty collections and bad smoothing") {
  const std::vector<SentenceRecord> human = {sentence({"a"})};
  const std::vector<SentenceRecord> none;
  const Vocabulary v = vocab_of({"a"});
  CHECK_THROWS_AS(fit_model(make_units(std::span<const SentenceRecord>(none)),
                            make_units(std::span<const SentenceRecord>(human)), v, 1.0,
                            Unit::sentence),
                  DataError);
  CHECK_THROWS_AS(fit_model(make_units(std::span<const SentenceRecord>(human)),
                            make_units(std::span<const SentenceRecord>(human)), v, 0.0,
                            Unit::sentence),
                  UsageError);
}

TEST_CASE("empty-token units are excluded from fit and counted") {
  const std::vector<SentenceRecord> human = {sentence({"a"}), sentence({}), sentence({"a", "b"})};
  const std::vector<SentenceRecord> llm = {sentence({"b"})};
  const FitResult fit = fit_model(make_units(std::span<const SentenceRecord>(human)),
                                  make_units(std::span<const SentenceRecord>(llm)),
                                  vocab_of({"a", "b"}), 1.0, Unit::sentence);
  CHECK(fit.model.n_p == 2);
  CHECK(fit.human_empty_skipped == 1);
}

TEST_CASE("scorer matches direct full-vocabulary summation to 1e-10") {
  // oracle: the O(M) sum over every vocabulary token
  Rng rng(7);
  std::vector<std::string> pool;
  for (int i = 0; i < 50; ++i) pool.push_back("w" + std::to_string(i));
  const auto human = random_sentences(rng, pool, 300);
  const auto llm = random_sentences(rng, pool, 300);
  const Vocabulary v = vocab_of(pool);
  const OccurrenceModel m = fit_model(make_units(std::span<const SentenceRecord>(human)),
                                      make_units(std::span<const SentenceRecord>(llm)), v, 1.0,
                                      Unit::sentence)
                                .model;
  const Scorer scorer(m);
  const auto direct = [&](const std::vector<std::string>& tokens) {
    double lp = 0, lq = 0;
    for (std::size_t t = 0; t < m.vocabulary.size(); ++t) {
      const bool present = std::binary_search(tokens.begin(), tokens.end(), m.vocabulary.tokens[t]);
      lp += present ? std::log(m.p(t)) : std::log1p(-m.p(t));
      lq += present ? std::log(m.q(t)) : std::log1p(-m.q(t));
    }
    return SentenceScore{lp, lq, lq - lp};
  };
  for (const auto& s : random_sentences(rng, pool, 20)) {
    const SentenceScore fast = scorer.score(s.tokens);
    const SentenceScore slow = direct(s.tokens);
    CHECK(fast.log_p == doctest::Approx(slow.log_p).epsilon(1e-10));
    CHECK(fast.log_q == doctest::Approx(slow.log_q).epsilon(1e-10));
    CHECK(fast.log_ratio == doctest::Approx(slow.log_ratio).epsilon(1e-10));
  }
}

TEST_CASE("empty token set scores the all-absent baseline, p=q scores zero ratio") {
  const std::vector<SentenceRecord> ref = {sentence({"a"}), sentence({"b"})};
  const OccurrenceModel m = fit_model(make_units(std::span<const SentenceRecord>(ref)),
                                      make_units(std::span<const SentenceRecord>(ref)),
                                      vocab_of({"a", "b"}), 1.0, Unit::sentence)
                                .model;
  const Scorer scorer(m);
  const SentenceScore empty = scorer.score({});
  CHECK(empty.log_p == doctest::Approx(scorer.baseline_p()));
  CHECK(empty.log_ratio == doctest::Approx(0.0)); // identical reference corpora
  const SentenceScore one = scorer.score({"a"});
  CHECK(one.log_ratio == doctest::Approx(0.0));
}

TEST_CASE("tokens outside the vocabulary are ignored") {
  const std::vector<SentenceRecord> ref = {sentence({"a"}), sentence({"b"})};
  const std::vector<SentenceRecord> ref2 = {sentence({"a", "b"})};
  const OccurrenceModel m = fit_model(make_units(std::span<const SentenceRecord>(ref)),
                                      make_units(std::span<const SentenceRecord>(ref2)),
                                      vocab_of({"a", "b"}), 1.0, Unit::sentence)
                                .model;
  const Scorer scorer(m);
  CHECK(scorer.score({"a", "zzz"}).log_p == doctest::Approx(scorer.score({"a"}).log_p));
}

TEST_CASE("document unit pools tokens per record") {
  Corpus c;
  RawRecord r;
  r.id = "doc1";
  r.date = parse_date("2020-01-01");
  r.venue = "v";
  r.section = Section::abstract;
  r.text = "unused";
  c.records.push_back(r);
  c.by_id["doc1"] = 0;
  SentenceRecord s1 = sentence({"a", "b"});
  s1.parent_id = "doc1";
  SentenceRecord s2 = sentence({"b", "c"});
  s2.parent_id = "doc1";
  c.sentences = {s1, s2};

  const Units docs = make_units(c, Unit::document);
  REQUIRE(docs.size() == 1);
  CHECK(*docs.view[0] == std::vector<std::string>{"a", "b", "c"});
  const Units sents = make_units(c, Unit::sentence);
  CHECK(sents.size() == 2);
}

TEST_CASE("save/load round-trips and scoring agrees to the last bit") {
  Rng rng(101);
  std::vector<std::string> pool;
  for (int i = 0; i < 40; ++i) pool.push_back("t" + std::to_string(i));
  const auto human = random_sentences(rng, pool, 500);
  const auto llm = random_sentences(rng, pool, 400);
  OccurrenceModel m = fit_model(make_units(std::span<const SentenceRecord>(human)),
                                make_units(std::span<const SentenceRecord>(llm)), vocab_of(pool),
                                0.75, Unit::sentence, {"id1", "id2"})
                          .model;
  m.provenance_json = R"({"tool_version":"0.1.0"})";

  const auto path = (fs::temp_directory_path() / "llmfrac_model.json").string();
  save_model(m, path);
  const OccurrenceModel loaded = load_model(path);
  CHECK(loaded.provenance_json.find("tool_version") != std::string::npos);
  CHECK(loaded.n_p == m.n_p);
  CHECK(loaded.n_q == m.n_q);
  CHECK(loaded.occ_p == m.occ_p);
  CHECK(loaded.occ_q == m.occ_q);
  CHECK(loaded.smoothing == m.smoothing);
  CHECK(loaded.unit == m.unit);
  CHECK(loaded.vocabulary.tokens == m.vocabulary.tokens);
  CHECK(loaded.training_ids == m.training_ids);

  const Scorer before(m);
  const Scorer after(loaded);
  for (const auto& s : random_sentences(rng, pool, 100)) {
    CHECK(before.score(s.tokens).log_p == after.score(s.tokens).log_p);
    CHECK(before.score(s.tokens).log_q == after.score(s.tokens).log_q);
  }
  fs::remove(path);
}

TEST_CASE("model file integrity failures are data errors") {
  const std::vector<SentenceRecord> ref = {sentence({"a"}), sentence({"b"})};
  const OccurrenceModel m = fit_model(make_units(std::span<const SentenceRecord>(ref)),
                                      make_units(std::span<const SentenceRecord>(ref)),
                                      vocab_of({"a", "b"}), 1.0, Unit::sentence)
                                .model;
  const auto dir = fs::temp_directory_path();

  SUBCASE("truncated file fails the checksum") {
    const auto path = (dir / "llmfrac_trunc.json").string();
    save_model(m, path);
    std::string text;
    {
      std::ifstream in(path, std::ios::binary);
      text.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    }
    {
      std::ofstream out(path, std::ios::binary | std::ios::trunc);
      out << text.substr(0, text.size() / 2);
    }
    CHECK_THROWS_AS(load_model(path), DataError);
    fs::remove(path);
  }
  SUBCASE("tampered counts fail the checksum") {
    const std::string text = model_to_json(m);
    std::string tampered = text;
    const auto pos = tampered.find("\"occ_p\":[");
    REQUIRE(pos != std::string::npos);
    tampered[pos + 9] = tampered[pos + 9] == '1' ? '2' : '1';
    CHECK_THROWS_WITH_AS(model_from_json(tampered), "model file: checksum mismatch", DataError);
  }
  SUBCASE("version mismatch") {
    std::string text = model_to_json(m);
    const auto pos = text.find("\"format_version\":1");
    REQUIRE(pos != std::string::npos);
    text.replace(pos, 18, "\"format_version\":9");
    CHECK_THROWS_AS(model_from_json(text), DataError);
  }
  SUBCASE("empty path is an I/O error") {
    CHECK_THROWS_AS(save_model(m, ""), DataError);
    CHECK_THROWS_AS(load_model(""), DataError);
  }
}

TEST_CASE("refitting a loaded model with new smoothing equals refitting raw data") {
  Rng rng(55);
  std::vector<std::string> pool;
  for (int i = 0; i < 30; ++i) pool.push_back("s" + std::to_string(i));
  const auto human = random_sentences(rng, pool, 200);
  const auto llm = random_sentences(rng, pool, 200);
  const Vocabulary v = vocab_of(pool);
  const OccurrenceModel m1 = fit_model(make_units(std::span<const SentenceRecord>(human)),
                                       make_units(std::span<const SentenceRecord>(llm)), v, 1.0,
                                       Unit::sentence)
                                 .model;
  const auto path = (fs::temp_directory_path() / "llmfrac_resmooth.json").string();
  save_model(m1, path);
  const OccurrenceModel reloaded = load_model(path).with_smoothing(0.25);
  const OccurrenceModel refit = fit_model(make_units(std::span<const SentenceRecord>(human)),
                                          make_units(std::span<const SentenceRecord>(llm)), v,
                                          0.25, Unit::sentence)
                                    .model;
  for (std::size_t t = 0; t < v.tokens.size(); ++t) {
    CHECK(reloaded.p(t) == refit.p(t)); // exact: counts are stored, not probabilities
    CHECK(reloaded.q(t) == refit.q(t));
  }
  fs::remove(path);
}
