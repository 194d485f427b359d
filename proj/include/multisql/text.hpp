#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace multisql::text {

std::string to_lower(std::string_view s);
std::string to_upper(std::string_view s);
std::string_view trim(std::string_view s);
bool iequals(std::string_view a, std::string_view b);
bool istarts_with(std::string_view s, std::string_view prefix);

// Splits on any character in `delims`; empty pieces are dropped after
// trimming.
std::vector<std::string> split_any(std::string_view s, std::string_view delims);

// Collapses runs of whitespace to one space and trims the ends.
std::string collapse_whitespace(std::string_view s);

// Fills {name} placeholders from `values`; unknown placeholders are kept.
std::string fill_template(std::string_view tmpl, const std::map<std::string, std::string>& values);

// Longest prefix of `s` of at most `max_bytes` that does not split a UTF-8
// sequence.
std::string_view utf8_prefix(std::string_view s, std::size_t max_bytes);

// Stable 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view s, std::uint64_t seed = 14695981039346656037ULL);

// Edit distance with unit costs over bytes. Returns `cap + 1` as soon as the
// distance is known to exceed `cap`.
std::size_t levenshtein(std::string_view a, std::string_view b,
                        std::size_t cap = static_cast<std::size_t>(-1));

// Lowercased alphanumeric words.
std::vector<std::string> words(std::string_view s);

// Words of `s` minus a small English stop list; used as the keyword fallback.
std::vector<std::string> content_words(std::string_view s);

}  // namespace multisql::text
