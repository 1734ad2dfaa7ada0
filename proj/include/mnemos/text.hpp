#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace mnemos::text {

// ASCII lowercase; bytes >= 0x80 pass through unchanged.
std::string to_lower(std::string_view s);

// Lowercases, then splits on runs of non-alphanumeric ASCII. Bytes >= 0x80
// count as word characters so UTF-8 letters stay inside their word.
std::vector<std::string> words(std::string_view s);

// Case-folded, trimmed, interior whitespace collapsed to one space.
std::string canonical_key(std::string_view label);

std::string trim(std::string_view s);

// Splits UTF-8 into code points (each returned as its byte sequence).
// Stray continuation bytes are attached to the preceding code point.
std::vector<std::string_view> code_points(std::string_view s);

// True if `needle` occurs in `haystack` ignoring ASCII case.
bool contains_ci(std::string_view haystack, std::string_view needle);

} // namespace mnemos::text
