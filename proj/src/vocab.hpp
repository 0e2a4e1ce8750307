#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "corpus.hpp"

namespace llmfrac {

enum class VocabSource { full, external_list };

// The ordered token list T that parameterizes the occurrence model.
struct Vocabulary {
  std::vector<std::string> tokens; // sorted, unique, non-empty
  VocabSource source = VocabSource::full;
  std::int64_t min_df = 0;

  std::size_t size() const { return tokens.size(); }
};

// Union of tokens whose sentence-level document frequency across both
// collections is >= min_df.
Vocabulary build_vocabulary(std::span<const SentenceRecord> human,
                            std::span<const SentenceRecord> llm,
                            std::int64_t min_df);

struct TokenListLoad {
  Vocabulary vocabulary;
  std::size_t skipped = 0; // lines that do not form a single valid token
};

// Newline-delimited token file; '#' lines are comments. Entries are
// normalized, then must satisfy the tokenizer rules.
TokenListLoad load_token_list(const std::string& path);

} // namespace llmfrac
