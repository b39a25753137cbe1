#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace tracegraph::text {

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes);

/// Lower-case hex rendering of a 64-bit value, zero padded to 16 digits.
std::string hex64(std::uint64_t value);

/// Number of UTF-8 code points (continuation bytes are not counted).
std::size_t utf8_length(std::string_view s);

/// Byte offset of the `chars`-th code point, clamped to s.size().
std::size_t utf8_offset(std::string_view s, std::size_t chars);

/// Split into pages of at most `page_chars` code points. An empty string is
/// one empty page.
std::vector<std::string_view> paginate(std::string_view s, std::size_t page_chars);

/// Keep at most `max_chars` code points; append "…" when anything was cut.
std::string truncate_chars(std::string_view s, std::size_t max_chars);

/// Cut to at most `max_bytes` bytes without splitting a code point.
std::string_view clip_bytes(std::string_view s, std::size_t max_bytes);

std::string_view trim(std::string_view s);

/// "%0*zu"-style id: prefix + zero padded number.
std::string padded_id(std::string_view prefix, std::size_t n, int width);

}  // namespace tracegraph::text
