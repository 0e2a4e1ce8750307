#include "text.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <string_view>

namespace llmfrac {

namespace {

// --- UTF-8 ---

// Decodes one codepoint starting at i; advances i. Invalid sequences
// decode as 0xFFFD and advance one byte.
std::uint32_t decode_utf8(const std::string& s, std::size_t& i) {
  const auto byte = [&](std::size_t k) { return static_cast<unsigned char>(s[k]); };
  const unsigned char b0 = byte(i);
  if (b0 < 0x80) {
    ++i;
    return b0;
  }
  auto cont = [&](std::size_t k) {
    return k < s.size() && (byte(k) & 0xC0) == 0x80;
  };
  if ((b0 & 0xE0) == 0xC0 && cont(i + 1)) {
    std::uint32_t cp = (static_cast<std::uint32_t>(b0 & 0x1F) << 6) | (byte(i + 1) & 0x3F);
    i += 2;
    return cp < 0x80 ? 0xFFFD : cp;
  }
  if ((b0 & 0xF0) == 0xE0 && cont(i + 1) && cont(i + 2)) {
    std::uint32_t cp = (static_cast<std::uint32_t>(b0 & 0x0F) << 12) |
                       (static_cast<std::uint32_t>(byte(i + 1) & 0x3F) << 6) |
                       (byte(i + 2) & 0x3F);
    i += 3;
    return cp < 0x800 || (cp >= 0xD800 && cp <= 0xDFFF) ? 0xFFFD : cp;
  }
  if ((b0 & 0xF8) == 0xF0 && cont(i + 1) && cont(i + 2) && cont(i + 3)) {
    std::uint32_t cp = (static_cast<std::uint32_t>(b0 & 0x07) << 18) |
                       (static_cast<std::uint32_t>(byte(i + 1) & 0x3F) << 12) |
                       (static_cast<std::uint32_t>(byte(i + 2) & 0x3F) << 6) |
                       (byte(i + 3) & 0x3F);
    i += 4;
    return cp < 0x10000 || cp > 0x10FFFF ? 0xFFFD : cp;
  }
  ++i;
  return 0xFFFD;
}

void encode_utf8(std::uint32_t cp, std::string& out) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

// --- codepoint classification / mapping ---

bool is_space_cp(std::uint32_t cp) {
  switch (cp) {
    case 0x20: case 0xA0: case 0x1680: case 0x2028: case 0x2029:
    case 0x202F: case 0x205F: case 0x3000:
      return true;
    default:
      return cp >= 0x2000 && cp <= 0x200A;
  }
}

bool is_control_cp(std::uint32_t cp) {
  return cp < 0x20 || cp == 0x7F || (cp >= 0x80 && cp <= 0x9F) || cp == 0xFFFD;
}

std::uint32_t lowercase_cp(std::uint32_t cp) {
  if (cp >= 'A' && cp <= 'Z') return cp + 0x20;
  if (cp < 0x80) return cp;
  // Latin-1 supplement (0xD7 is the multiplication sign)
  if (cp >= 0xC0 && cp <= 0xDE && cp != 0xD7) return cp + 0x20;
  // Latin Extended-A case pairs
  if (cp >= 0x100 && cp <= 0x137 && (cp % 2) == 0) return cp + 1;
  if (cp >= 0x139 && cp <= 0x147 && (cp % 2) == 1) return cp + 1;
  if (cp >= 0x14A && cp <= 0x176 && (cp % 2) == 0) return cp + 1;
  if (cp == 0x178) return 0xFF;
  if ((cp == 0x179 || cp == 0x17B || cp == 0x17D)) return cp + 1;
  // Greek
  if (cp == 0x386) return 0x3AC;
  if (cp >= 0x388 && cp <= 0x38A) return cp + 0x25;
  if (cp == 0x38C) return 0x3CC;
  if (cp == 0x38E || cp == 0x38F) return cp + 0x3F;
  if (cp >= 0x391 && cp <= 0x3AB && cp != 0x3A2) return cp + 0x20;
  // Cyrillic
  if (cp >= 0x400 && cp <= 0x40F) return cp + 0x50;
  if (cp >= 0x410 && cp <= 0x42F) return cp + 0x20;
  return cp;
}

// Compatibility expansion for the forms that actually show up in paper
// text: fullwidth ASCII, Latin ligatures, long s, super/subscript digits.
// Returns the number of codepoints written to out (0 means "drop").
std::size_t compat_expand(std::uint32_t cp, std::array<std::uint32_t, 3>& out) {
  if (cp == 0xAD || cp == 0x200B || cp == 0x200C || cp == 0x200D || cp == 0xFEFF)
    return 0; // soft hyphen, zero-width
  if (cp >= 0xFF01 && cp <= 0xFF5E) {
    out[0] = cp - 0xFEE0;
    return 1;
  }
  switch (cp) {
    case 0xFB00: out = {'f', 'f', 0}; return 2;
    case 0xFB01: out = {'f', 'i', 0}; return 2;
    case 0xFB02: out = {'f', 'l', 0}; return 2;
    case 0xFB03: out = {'f', 'f', 'i'}; return 3;
    case 0xFB04: out = {'f', 'f', 'l'}; return 3;
    case 0xFB05: case 0xFB06: out = {'s', 't', 0}; return 2;
    case 0x17F: out[0] = 's'; return 1;
    case 0xB9: out[0] = '1'; return 1;
    case 0xB2: out[0] = '2'; return 1;
    case 0xB3: out[0] = '3'; return 1;
    default: break;
  }
  if (cp >= 0x2070 && cp <= 0x2079) {
    out[0] = cp == 0x2070 ? '0' : (cp == 0x2071 ? 'i' : '0' + (cp - 0x2070));
    return 1;
  }
  if (cp >= 0x2080 && cp <= 0x2089) {
    out[0] = '0' + (cp - 0x2080);
    return 1;
  }
  out[0] = cp;
  return 1;
}

bool is_letter_cp(std::uint32_t cp) {
  if ((cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z')) return true;
  if (cp < 0x80) return false;
  if (cp >= 0xC0 && cp <= 0xFF && cp != 0xD7 && cp != 0xF7) return true;
  if (cp >= 0x100 && cp <= 0x24F) return true; // Latin Extended-A/B
  if (cp >= 0x386 && cp <= 0x3FF && cp != 0x387) return true; // Greek
  if (cp >= 0x400 && cp <= 0x4FF) return true; // Cyrillic
  return false;
}

bool is_word_cp(std::uint32_t cp) {
  if (cp >= '0' && cp <= '9') return true;
  return is_letter_cp(cp);
}

} // namespace

std::string normalize(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  std::size_t i = 0;
  std::array<std::uint32_t, 3> expanded{};
  while (i < text.size()) {
    const std::uint32_t cp = decode_utf8(text, i);
    const std::size_t n = compat_expand(cp, expanded);
    for (std::size_t k = 0; k < n; ++k) {
      const std::uint32_t e = expanded[k];
      if (is_control_cp(e) || is_space_cp(e)) {
        pending_space = true;
        continue;
      }
      if (pending_space) {
        if (!out.empty()) out.push_back(' ');
        pending_space = false;
      }
      encode_utf8(lowercase_cp(e), out);
    }
  }
  return out;
}

namespace {

constexpr std::string_view kAbbrevGuards[] = {
    "et al.", "e.g.", "i.e.", "cf.", "vs.", "fig.", "figs.", "eq.", "eqs.",
    "sec.", "secs.", "tab.", "ref.", "refs.", "no.", "nos.", "vol.", "resp.",
    "ca.", "approx.", "dr.", "prof.", "mr.", "mrs.", "ms.", "jr.", "sr.",
};

bool word_boundary_before(const std::string& text, std::size_t pos) {
  if (pos == 0) return true;
  const unsigned char prev = static_cast<unsigned char>(text[pos - 1]);
  return !(std::isalnum(prev) || prev >= 0x80); // "(fig." guards, "subfig." does not
}

// A word like "j." — one letter plus a period.
bool initialish(std::string_view w) {
  return w.size() == 2 && w[1] == '.' &&
         static_cast<unsigned char>(w[0]) < 0x80 && std::isalpha(static_cast<unsigned char>(w[0]));
}

std::string_view word_ending_at(const std::string& text, std::size_t end) {
  std::size_t b = end;
  while (b > 0 && text[b - 1] != ' ') --b;
  return std::string_view(text).substr(b, end - b);
}

std::string_view word_starting_at(const std::string& text, std::size_t begin) {
  std::size_t e = begin;
  while (e < text.size() && text[e] != ' ') ++e;
  return std::string_view(text).substr(begin, e - begin);
}

// Decides whether the terminator at position i (followed by whitespace)
// really ends a sentence.
bool is_sentence_break(const std::string& text, std::size_t i) {
  if (text[i] != '.') return true; // ! and ? are unambiguous
  for (std::string_view g : kAbbrevGuards) {
    if (i + 1 < g.size()) continue;
    const std::size_t pos = i + 1 - g.size();
    if (std::string_view(text).substr(pos, g.size()) == g && word_boundary_before(text, pos)) {
      return false;
    }
  }
  const std::string_view word = word_ending_at(text, i + 1);
  if (initialish(word)) {
    // Runs of initials ("j. k. rowling") stay together; an ordinary short
    // word before the period ("we study x. we ...") still splits.
    const std::string_view next = word_starting_at(text, std::min(text.size(), i + 2));
    const std::size_t word_start = i + 1 - word.size();
    const std::string_view prev =
        word_start >= 1 ? word_ending_at(text, word_start - 1) : std::string_view{};
    if (initialish(next) || initialish(prev)) return false;
  }
  return true;
}

} // namespace

std::vector<std::string> segment_sentences(const std::string& text) {
  std::vector<std::string> sentences;
  std::size_t start = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if ((c == '.' || c == '!' || c == '?') && i + 1 < text.size() && text[i + 1] == ' ' &&
        is_sentence_break(text, i)) {
      const std::size_t len = i + 1 - start;
      if (len > 0) sentences.emplace_back(text.substr(start, len));
      start = i + 2; // skip the single space
    }
  }
  if (start < text.size()) sentences.emplace_back(text.substr(start));
  return sentences;
}

std::vector<std::string> tokenize(const std::string& sentence) {
  std::vector<std::string> tokens;
  std::string current;
  std::size_t cp_len = 0;
  bool has_letter = false;
  auto flush = [&] {
    if (cp_len >= 2 && has_letter) tokens.push_back(current);
    current.clear();
    cp_len = 0;
    has_letter = false;
  };
  std::size_t i = 0;
  while (i < sentence.size()) {
    const std::uint32_t cp = decode_utf8(sentence, i);
    if (is_word_cp(cp)) {
      encode_utf8(cp, current);
      ++cp_len;
      has_letter = has_letter || is_letter_cp(cp);
    } else {
      flush();
    }
  }
  flush();
  std::sort(tokens.begin(), tokens.end());
  tokens.erase(std::unique(tokens.begin(), tokens.end()), tokens.end());
  return tokens;
}

} // namespace llmfrac
