#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace tagshot::text {

std::string trim(std::string_view s);

/// Unicode NFKC normalization of UTF-8 text. Invalid UTF-8 is replaced.
std::string nfkc(std::string_view utf8);

/// Splits UTF-8 text into its Unicode scalar values (each re-encoded as UTF-8).
std::vector<std::string> code_points(std::string_view utf8);

/// True for code points with the Unicode White_Space property.
bool is_unicode_space(std::uint32_t cp);

/// Decodes one code point starting at `pos`; advances `pos`. Returns U+FFFD on
/// malformed input.
std::uint32_t decode_utf8(std::string_view s, std::size_t& pos);

/// Clips to at most `max_bytes` bytes without splitting a code point.
std::string utf8_prefix(std::string_view s, std::size_t max_bytes);

std::string sha256_hex(std::string_view data);

bool ascii_iequals(std::string_view a, std::string_view b);

}  // namespace tagshot::text
