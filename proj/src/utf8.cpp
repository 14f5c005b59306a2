#include "xlabel/utf8.hpp"

#include <algorithm>
#include <array>
#include <utility>

#include "xlabel/error.hpp"

namespace xlabel::utf8 {

namespace {

constexpr std::pair<char32_t, char32_t> kPunctRanges[] = {
#include "unicode_punct.inc"
};

// Returns the code point and advances pos, or returns false on malformed input.
bool next(std::string_view s, std::size_t& pos, char32_t& cp) {
  const auto b0 = static_cast<unsigned char>(s[pos]);
  std::size_t len = 0;
  char32_t min = 0;
  if (b0 < 0x80) {
    cp = b0;
    ++pos;
    return true;
  } else if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
    min = 0x80;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
    min = 0x800;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    cp = b0 & 0x07;
    min = 0x10000;
  } else {
    return false;
  }
  if (pos + len > s.size()) return false;
  for (std::size_t i = 1; i < len; ++i) {
    const auto b = static_cast<unsigned char>(s[pos + i]);
    if ((b & 0xC0) != 0x80) return false;
    cp = (cp << 6) | (b & 0x3F);
  }
  // overlong, surrogate, out of range
  if (cp < min || (cp >= 0xD800 && cp <= 0xDFFF) || cp > 0x10FFFF) return false;
  pos += len;
  return true;
}

}  // namespace

bool is_valid(std::string_view text) {
  std::size_t pos = 0;
  char32_t cp = 0;
  while (pos < text.size()) {
    if (!next(text, pos, cp)) return false;
  }
  return true;
}

std::vector<char32_t> decode(std::string_view text) {
  std::vector<char32_t> out;
  out.reserve(text.size());
  std::size_t pos = 0;
  char32_t cp = 0;
  while (pos < text.size()) {
    if (!next(text, pos, cp)) {
      throw InputError("invalid UTF-8 at byte " + std::to_string(pos));
    }
    out.push_back(cp);
  }
  return out;
}

std::string encode(char32_t cp) {
  std::string out;
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    out += static_cast<char>(0xE0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    out += static_cast<char>(0xF0 | (cp >> 18));
    out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
  return out;
}

bool is_punctuation(char32_t cp) {
  auto it = std::upper_bound(std::begin(kPunctRanges), std::end(kPunctRanges), cp,
                             [](char32_t c, const auto& r) { return c < r.first; });
  if (it == std::begin(kPunctRanges)) return false;
  --it;
  return cp <= it->second;
}

bool is_punctuation_word(std::string_view word) {
  if (word.empty() || !is_valid(word)) return false;
  const auto cps = decode(word);
  return std::all_of(cps.begin(), cps.end(), is_punctuation);
}

}  // namespace xlabel::utf8
