#pragma once

// Line-oriented `key = value` files with `#` comments.

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "kgf/error.hpp"
#include "kgf/text.hpp"

namespace kgf {

using KeyValues = std::vector<std::pair<std::string, std::string>>;

inline KeyValues parse_key_values(std::string_view content, const std::string& source = "config") {
  KeyValues out;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= content.size()) {
    std::size_t end = content.find('\n', start);
    if (end == std::string_view::npos) end = content.size();
    std::string_view line = content.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = text::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      fail(ErrorKind::InvalidConfig, source + ":" + std::to_string(line_no) + ": expected 'key = value'");
    }
    const auto key = text::trim(line.substr(0, eq));
    const auto value = text::trim(line.substr(eq + 1));
    if (key.empty()) fail(ErrorKind::InvalidConfig, source + ":" + std::to_string(line_no) + ": empty key");
    for (const auto& [k, v] : out) {
      if (k == key) fail(ErrorKind::InvalidConfig, source + ":" + std::to_string(line_no) + ": duplicate key '" + k + "'");
    }
    out.emplace_back(std::string(key), std::string(value));
    if (end == content.size()) break;
  }
  return out;
}

inline std::string format_key_values(const KeyValues& entries) {
  std::string out;
  for (const auto& [k, v] : entries) out += k + " = " + v + "\n";
  return out;
}

namespace config_detail {

inline double to_double(const std::string& key, const std::string& value) {
  const auto v = text::parse_double(value);
  if (!v) fail(ErrorKind::InvalidConfig, key + ": '" + value + "' is not a number");
  return *v;
}

template <typename Int>
Int to_int(const std::string& key, const std::string& value) {
  const auto v = text::parse_int<Int>(value);
  if (!v) fail(ErrorKind::InvalidConfig, key + ": '" + value + "' is not an integer");
  return *v;
}

}  // namespace config_detail

}  // namespace kgf
