#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace llmfrac {

enum class Section { abstract, introduction };
enum class SectionFilter { any, abstract, introduction };

const char* to_string(Section s);
Section section_from_string(const std::string& s);
SectionFilter section_filter_from_string(const std::string& s);

struct Date {
  int year = 0;
  int month = 0;
  int day = 0;

  auto operator<=>(const Date&) const = default;
  std::string iso() const;      // yyyy-mm-dd
  std::string year_month() const; // yyyy-mm
};

Date parse_date(const std::string& iso); // throws DataError on invalid dates

// One sampled paper section plus the metadata the stratified analyses use.
struct RawRecord {
  std::string id;
  Date date;
  std::string venue;
  Section section = Section::abstract;
  std::string text;
  std::optional<std::string> first_author_id;
  std::optional<std::int64_t> preprint_count_year;
  std::optional<std::int64_t> fulltext_word_count;
  std::optional<std::vector<double>> embedding;
  // Original file line, kept verbatim so serialization round-trips
  // byte-identically and unknown keys survive.
  std::string raw_line;
};

// One data point: a sentence of a parent record, reduced to its token set.
struct SentenceRecord {
  std::string parent_id;
  std::uint32_t index = 0;
  std::vector<std::string> tokens; // sorted, unique
  std::string raw;
};

struct Corpus {
  std::vector<RawRecord> records;
  std::vector<SentenceRecord> sentences;            // filled by prepare()
  std::unordered_map<std::string, std::size_t> by_id; // record id -> index
  std::size_t empty_token_sentences = 0;            // diagnostics

  const RawRecord& record_of(const SentenceRecord& s) const;
};

// Reads a line-delimited JSON corpus file. Required keys per line:
// id, date, venue, section, text. Errors name the offending line.
Corpus load_corpus(const std::string& path, SectionFilter filter = SectionFilter::any);

// Writes records back out, one line each. Records loaded from a file are
// written verbatim; synthesized records are serialized fresh.
void save_corpus(const Corpus& corpus, const std::string& path);

// normalize -> segment -> tokenize for every record; fills sentences.
void prepare(Corpus& corpus);

// Explicit carry-forward of preprint_count_year from the most recent
// earlier year with data for the same first author. Returns the number
// of records filled. Never applied implicitly.
std::size_t carry_forward_author_metadata(Corpus& corpus);

// Attaches embeddings from a sidecar file keyed by record id; lines for
// unknown ids are counted, not errors.
struct SidecarLoad {
  std::size_t attached = 0;
  std::size_t unmatched = 0;
};
SidecarLoad load_embeddings_sidecar(Corpus& corpus, const std::string& path);

} // namespace llmfrac
