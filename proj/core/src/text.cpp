#include "crcvote/text.hpp"

#include <array>
#include <charconv>
#include <fstream>
#include <sstream>

#include "crcvote/error.hpp"

namespace crcvote {

std::string format_double(double value) {
  std::array<char, 64> buffer{};
  auto [end, ec] = std::to_chars(buffer.data(), buffer.data() + buffer.size(), value);
  if (ec != std::errc{}) {
    throw Error(ErrorCategory::internal, "cannot format double");
  }
  return std::string(buffer.data(), end);
}

std::string_view trim(std::string_view text) {
  constexpr std::string_view blanks = " \t\r\n";
  auto first = text.find_first_not_of(blanks);
  if (first == std::string_view::npos) {
    return {};
  }
  auto last = text.find_last_not_of(blanks);
  return text.substr(first, last - first + 1);
}

std::vector<std::string_view> split(std::string_view text, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    auto pos = text.find(sep, start);
    if (pos == std::string_view::npos) {
      parts.push_back(text.substr(start));
      return parts;
    }
    parts.push_back(text.substr(start, pos - start));
    start = pos + 1;
  }
}

std::optional<double> parse_double(std::string_view text) {
  text = trim(text);
  if (text.empty()) {
    return std::nullopt;
  }
  // from_chars rejects a leading '+'; accept it for hand-written files.
  if (text.front() == '+') {
    text.remove_prefix(1);
  }
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    return std::nullopt;
  }
  return value;
}

std::optional<std::int64_t> parse_int(std::string_view text) {
  text = trim(text);
  if (text.empty()) {
    return std::nullopt;
  }
  if (text.front() == '+') {
    text.remove_prefix(1);
  }
  std::int64_t value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    return std::nullopt;
  }
  return value;
}

KeyValueConfig KeyValueConfig::parse(std::string_view text, std::string_view source) {
  KeyValueConfig config;
  int line_number = 0;
  for (auto raw : split(text, '\n')) {
    ++line_number;
    auto line = trim(raw);
    if (line.empty() || line.front() == '#') {
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorCategory::schema, std::string(source) + ":" + std::to_string(line_number) +
                                             ": expected key=value");
    }
    std::string key(trim(line.substr(0, eq)));
    std::string value(trim(line.substr(eq + 1)));
    if (key.empty()) {
      throw Error(ErrorCategory::schema,
                  std::string(source) + ":" + std::to_string(line_number) + ": empty key");
    }
    if (config.has(key)) {
      throw Error(ErrorCategory::schema, std::string(source) + ":" + std::to_string(line_number) +
                                             ": duplicate key '" + key + "'");
    }
    config.values_.emplace(std::move(key), std::move(value));
  }
  return config;
}

KeyValueConfig KeyValueConfig::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCategory::io, "cannot open config file '" + path + "'");
  }
  std::ostringstream content;
  content << in.rdbuf();
  return parse(content.str(), path);
}

std::optional<std::string> KeyValueConfig::get_string(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) {
    return std::nullopt;
  }
  return it->second;
}

std::optional<double> KeyValueConfig::get_double(const std::string& key) const {
  auto raw = get_string(key);
  if (!raw) {
    return std::nullopt;
  }
  auto value = parse_double(*raw);
  if (!value) {
    throw Error(ErrorCategory::schema, "config key '" + key + "': not a number: '" + *raw + "'");
  }
  return value;
}

std::optional<std::int64_t> KeyValueConfig::get_int(const std::string& key) const {
  auto raw = get_string(key);
  if (!raw) {
    return std::nullopt;
  }
  auto value = parse_int(*raw);
  if (!value) {
    throw Error(ErrorCategory::schema, "config key '" + key + "': not an integer: '" + *raw + "'");
  }
  return value;
}

std::optional<bool> KeyValueConfig::get_bool(const std::string& key) const {
  auto raw = get_string(key);
  if (!raw) {
    return std::nullopt;
  }
  if (*raw == "true" || *raw == "1" || *raw == "on") {
    return true;
  }
  if (*raw == "false" || *raw == "0" || *raw == "off") {
    return false;
  }
  throw Error(ErrorCategory::schema, "config key '" + key + "': not a boolean: '" + *raw + "'");
}

}  // namespace crcvote
