#include "vocab.hpp"

#include <algorithm>
#include <fstream>
#include <unordered_map>

#include "errors.hpp"
#include "text.hpp"

namespace llmfrac {

Vocabulary build_vocabulary(std::span<const SentenceRecord> human,
                            std::span<const SentenceRecord> llm,
                            std::int64_t min_df) {
  if (human.empty() || llm.empty())
    throw DataError("build_vocabulary: both sentence collections must be non-empty");
  if (min_df < 1) throw UsageError("build_vocabulary: min_df must be >= 1");

  std::unordered_map<std::string, std::int64_t> df;
  for (auto span : {human, llm}) {
    for (const auto& s : span) {
      for (const auto& t : s.tokens) ++df[t]; // token sets: one count per sentence
    }
  }

  Vocabulary v;
  v.source = VocabSource::full;
  v.min_df = min_df;
  v.tokens.reserve(df.size());
  for (const auto& [token, count] : df) {
    if (count >= min_df) v.tokens.push_back(token);
  }
  std::sort(v.tokens.begin(), v.tokens.end());
  if (v.tokens.empty()) throw DataError("no tokens pass min_df");
  return v;
}

TokenListLoad load_token_list(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open token list '" + path + "'");

  TokenListLoad out;
  out.vocabulary.source = VocabSource::external_list;
  out.vocabulary.min_df = 0;

  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string norm = normalize(line);
    if (norm.empty() || norm[0] == '#') continue;
    auto tokens = tokenize(norm);
    if (tokens.size() == 1 && tokens[0] == norm) {
      out.vocabulary.tokens.push_back(tokens[0]);
    } else {
      ++out.skipped;
    }
  }
  auto& toks = out.vocabulary.tokens;
  std::sort(toks.begin(), toks.end());
  toks.erase(std::unique(toks.begin(), toks.end()), toks.end());
  if (toks.empty()) throw DataError("token list '" + path + "' contains no valid tokens");
  return out;
}

} // namespace llmfrac
