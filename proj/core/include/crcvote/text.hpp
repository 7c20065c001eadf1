#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace crcvote {

/// Shortest decimal text that parses back to the identical double.
std::string format_double(double value);

/// Strict parse: the whole of `text` must be a decimal numeral
/// (surrounding blanks allowed). Returns nullopt otherwise.
std::optional<double> parse_double(std::string_view text);
std::optional<std::int64_t> parse_int(std::string_view text);

std::string_view trim(std::string_view text);
std::vector<std::string_view> split(std::string_view text, char sep);

/// Flat `key=value` configuration with dotted keys.
///
/// Lines starting with `#` and blank lines are ignored. Keys may appear at
/// most once per file; `set` overrides (used for command-line flags).
class KeyValueConfig {
 public:
  KeyValueConfig() = default;

  static KeyValueConfig parse(std::string_view text, std::string_view source = "<string>");
  static KeyValueConfig load(const std::string& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }

  std::optional<std::string> get_string(const std::string& key) const;
  /// Typed getters throw Error(schema) naming the key when the value is malformed.
  std::optional<double> get_double(const std::string& key) const;
  std::optional<std::int64_t> get_int(const std::string& key) const;
  std::optional<bool> get_bool(const std::string& key) const;

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace crcvote
