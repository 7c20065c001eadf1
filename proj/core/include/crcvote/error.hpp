#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace crcvote {

/// Coarse error classes. The CLI prints them as `error:<category>:<message>`.
enum class ErrorCategory {
  usage,
  io,
  schema,
  range,
  model,
  numeric,
  metric,
  internal,
};

std::string_view to_string(ErrorCategory category);

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& message)
      : std::runtime_error(message), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

}  // namespace crcvote
