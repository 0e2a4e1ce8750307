#include "corpus.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>

#include <json.hpp>

#include "errors.hpp"
#include "text.hpp"

namespace llmfrac {

using json = nlohmann::json;

const char* to_string(Section s) {
  return s == Section::abstract ? "abstract" : "introduction";
}

Section section_from_string(const std::string& s) {
  if (s == "abstract") return Section::abstract;
  if (s == "introduction") return Section::introduction;
  throw DataError("unknown section '" + s + "' (expected abstract|introduction)");
}

SectionFilter section_filter_from_string(const std::string& s) {
  if (s.empty() || s == "any" || s == "all") return SectionFilter::any;
  if (s == "abstract") return SectionFilter::abstract;
  if (s == "introduction") return SectionFilter::introduction;
  throw UsageError("unknown section filter '" + s + "'");
}

std::string Date::iso() const {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", year, month, day);
  return buf;
}

std::string Date::year_month() const {
  char buf[12];
  std::snprintf(buf, sizeof(buf), "%04d-%02d", year, month);
  return buf;
}

namespace {

bool leap(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

int days_in_month(int y, int m) {
  static constexpr int d[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  if (m == 2 && leap(y)) return 29;
  return d[m - 1];
}

} // namespace

Date parse_date(const std::string& iso) {
  Date d;
  if (iso.size() != 10 || iso[4] != '-' || iso[7] != '-')
    throw DataError("invalid date '" + iso + "' (expected yyyy-mm-dd)");
  auto num = [&](std::size_t b, std::size_t n, int& out) {
    auto [p, ec] = std::from_chars(iso.data() + b, iso.data() + b + n, out);
    if (ec != std::errc{} || p != iso.data() + b + n)
      throw DataError("invalid date '" + iso + "'");
  };
  num(0, 4, d.year);
  num(5, 2, d.month);
  num(8, 2, d.day);
  if (d.month < 1 || d.month > 12 || d.day < 1 || d.day > days_in_month(d.year, d.month))
    throw DataError("invalid calendar date '" + iso + "'");
  return d;
}

const RawRecord& Corpus::record_of(const SentenceRecord& s) const {
  auto it = by_id.find(s.parent_id);
  if (it == by_id.end()) throw DataError("sentence parent id '" + s.parent_id + "' not in corpus");
  return records[it->second];
}

namespace {

RawRecord parse_record(const std::string& line, std::size_t line_no) {
  const std::string where = "line " + std::to_string(line_no) + ": ";
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw DataError(where + "malformed JSON (" + e.what() + ")");
  }
  if (!j.is_object()) throw DataError(where + "expected a JSON object");

  for (const char* key : {"id", "date", "venue", "section", "text"}) {
    if (!j.contains(key)) throw DataError(where + "missing field " + key);
  }

  RawRecord r;
  try {
    r.id = j.at("id").get<std::string>();
    r.venue = j.at("venue").get<std::string>();
    r.section = section_from_string(j.at("section").get<std::string>());
    r.text = j.at("text").get<std::string>();
    r.date = parse_date(j.at("date").get<std::string>());
    if (j.contains("first_author_id") && !j.at("first_author_id").is_null())
      r.first_author_id = j.at("first_author_id").get<std::string>();
    if (j.contains("preprint_count_year") && !j.at("preprint_count_year").is_null()) {
      auto v = j.at("preprint_count_year").get<std::int64_t>();
      if (v < 0) throw DataError("preprint_count_year must be non-negative");
      r.preprint_count_year = v;
    }
    if (j.contains("fulltext_word_count") && !j.at("fulltext_word_count").is_null()) {
      auto v = j.at("fulltext_word_count").get<std::int64_t>();
      if (v < 0) throw DataError("fulltext_word_count must be non-negative");
      r.fulltext_word_count = v;
    }
    if (j.contains("embedding") && !j.at("embedding").is_null())
      r.embedding = j.at("embedding").get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw DataError(where + "bad field type (" + e.what() + ")");
  } catch (const DataError& e) {
    throw DataError(where + e.what());
  }

  if (r.id.empty()) throw DataError(where + "id must be non-empty");
  if (r.text.find_first_not_of(" \t\r\n") == std::string::npos)
    throw DataError(where + "text empty after trimming");
  r.raw_line = line;
  return r;
}

} // namespace

Corpus load_corpus(const std::string& path, SectionFilter filter) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open corpus file '" + path + "'");

  Corpus corpus;
  std::unordered_map<std::string, std::size_t> seen; // ids unique across the whole file
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    RawRecord r = parse_record(line, line_no);
    if (!seen.emplace(r.id, line_no).second)
      throw DataError("line " + std::to_string(line_no) + ": duplicate id '" + r.id + "'");
    const bool keep = filter == SectionFilter::any ||
                      (filter == SectionFilter::abstract && r.section == Section::abstract) ||
                      (filter == SectionFilter::introduction && r.section == Section::introduction);
    if (!keep) continue;
    corpus.by_id.emplace(r.id, corpus.records.size());
    corpus.records.push_back(std::move(r));
  }
  return corpus;
}

void save_corpus(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  for (const auto& r : corpus.records) {
    if (!r.raw_line.empty()) {
      out << r.raw_line << '\n';
      continue;
    }
    json j;
    j["id"] = r.id;
    j["date"] = r.date.iso();
    j["venue"] = r.venue;
    j["section"] = to_string(r.section);
    j["text"] = r.text;
    if (r.first_author_id) j["first_author_id"] = *r.first_author_id;
    if (r.preprint_count_year) j["preprint_count_year"] = *r.preprint_count_year;
    if (r.fulltext_word_count) j["fulltext_word_count"] = *r.fulltext_word_count;
    if (r.embedding) j["embedding"] = *r.embedding;
    out << j.dump() << '\n';
  }
  if (!out) throw DataError("write failed for '" + path + "'");
}

void prepare(Corpus& corpus) {
  corpus.sentences.clear();
  corpus.empty_token_sentences = 0;
  for (const auto& r : corpus.records) {
    const std::string norm = normalize(r.text);
    std::uint32_t index = 0;
    for (auto& sentence : segment_sentences(norm)) {
      SentenceRecord s;
      s.parent_id = r.id;
      s.index = index++;
      s.tokens = tokenize(sentence);
      s.raw = std::move(sentence);
      if (s.tokens.empty()) ++corpus.empty_token_sentences;
      corpus.sentences.push_back(std::move(s));
    }
  }
}

SidecarLoad load_embeddings_sidecar(Corpus& corpus, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open embeddings sidecar '" + path + "'");
  SidecarLoad out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      const std::string id = j.at("id").get<std::string>();
      auto it = corpus.by_id.find(id);
      if (it == corpus.by_id.end()) {
        ++out.unmatched;
        continue;
      }
      corpus.records[it->second].embedding = j.at("embedding").get<std::vector<double>>();
      ++out.attached;
    } catch (const json::exception& e) {
      throw DataError("sidecar line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::size_t carry_forward_author_metadata(Corpus& corpus) {
  // Latest year with a known count, per author.
  std::unordered_map<std::string, std::pair<int, std::int64_t>> known;
  for (const auto& r : corpus.records) {
    if (!r.first_author_id || !r.preprint_count_year) continue;
    auto [it, inserted] = known.try_emplace(*r.first_author_id, r.date.year, *r.preprint_count_year);
    if (!inserted && r.date.year > it->second.first)
      it->second = {r.date.year, *r.preprint_count_year};
  }
  std::size_t filled = 0;
  for (auto& r : corpus.records) {
    if (r.preprint_count_year || !r.first_author_id) continue;
    auto it = known.find(*r.first_author_id);
    if (it != known.end() && it->second.first < r.date.year) {
      r.preprint_count_year = it->second.second;
      ++filled;
    }
  }
  return filled;
}

} // namespace llmfrac
