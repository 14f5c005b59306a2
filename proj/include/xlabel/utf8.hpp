#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace xlabel::utf8 {

bool is_valid(std::string_view text);

// Throws InputError if the text is not well-formed UTF-8.
std::vector<char32_t> decode(std::string_view text);
std::string encode(char32_t cp);

// Unicode general categories Pc, Pd, Ps, Pe, Pi, Pf and Po.
bool is_punctuation(char32_t cp);

// True when every code point of a non-empty word is punctuation.
bool is_punctuation_word(std::string_view word);

}  // namespace xlabel::utf8
