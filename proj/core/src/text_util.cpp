#include "tracegraph/text_util.hpp"

#include <algorithm>
#include <cstdio>

namespace tracegraph::text {

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

namespace {
bool is_continuation(unsigned char c) { return (c & 0xC0) == 0x80; }
}  // namespace

std::size_t utf8_length(std::string_view s) {
  return static_cast<std::size_t>(std::count_if(
      s.begin(), s.end(), [](char c) { return !is_continuation(static_cast<unsigned char>(c)); }));
}

std::size_t utf8_offset(std::string_view s, std::size_t chars) {
  std::size_t seen = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!is_continuation(static_cast<unsigned char>(s[i]))) {
      if (seen == chars) return i;
      ++seen;
    }
  }
  return s.size();
}

std::vector<std::string_view> paginate(std::string_view s, std::size_t page_chars) {
  std::vector<std::string_view> pages;
  if (page_chars == 0) page_chars = 1;
  while (!s.empty()) {
    std::size_t cut = utf8_offset(s, page_chars);
    pages.push_back(s.substr(0, cut));
    s.remove_prefix(cut);
  }
  if (pages.empty()) pages.emplace_back();
  return pages;
}

std::string truncate_chars(std::string_view s, std::size_t max_chars) {
  std::size_t cut = utf8_offset(s, max_chars);
  if (cut >= s.size()) return std::string(s);
  return std::string(s.substr(0, cut)) + "\xE2\x80\xA6";
}

std::string_view clip_bytes(std::string_view s, std::size_t max_bytes) {
  if (s.size() <= max_bytes) return s;
  std::size_t cut = max_bytes;
  while (cut > 0 && is_continuation(static_cast<unsigned char>(s[cut]))) --cut;
  return s.substr(0, cut);
}

std::string_view trim(std::string_view s) {
  const char* ws = " \t\r\n";
  auto first = s.find_first_not_of(ws);
  if (first == std::string_view::npos) return {};
  auto last = s.find_last_not_of(ws);
  return s.substr(first, last - first + 1);
}

std::string padded_id(std::string_view prefix, std::size_t n, int width) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%0*zu", width, n);
  return std::string(prefix) + buf;
}

}  // namespace tracegraph::text
