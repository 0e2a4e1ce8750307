#pragma once

#include <string>
#include <vector>

namespace llmfrac {

// Text preprocessing. The same three functions are applied to reference
// corpora and to inference corpora; the estimates are only comparable
// when preprocessing is shared, so these rules are fixed and versioned
// with the library.

// Compatibility normalization: lowercase, control characters to spaces,
// whitespace runs collapsed to a single space, leading/trailing
// whitespace stripped. Covers ASCII, Latin-1/Latin Extended-A, Greek and
// Cyrillic case folding plus common compatibility forms (fullwidth ASCII,
// Latin ligatures, unicode spaces, soft hyphen). Idempotent, total.
std::string normalize(const std::string& text);

// Splits normalized text on sentence-final punctuation (. ! ?) followed
// by whitespace. An abbreviation guard list (et al., e.g., i.e., fig.,
// eq., single-letter initials, ...) suppresses splits. Text without a
// terminator yields one sentence. Idempotent on its own output.
std::vector<std::string> segment_sentences(const std::string& text);

// Splits one sentence on non-alphanumeric boundaries and returns the set
// of distinct tokens, sorted. Tokens must have length >= 2 codepoints and
// contain at least one letter (digits-only tokens are dropped).
std::vector<std::string> tokenize(const std::string& sentence);

} // namespace llmfrac
