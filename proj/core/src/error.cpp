#include "crcvote/error.hpp"

namespace crcvote {

std::string_view to_string(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::usage:
      return "usage";
    case ErrorCategory::io:
      return "io";
    case ErrorCategory::schema:
      return "schema";
    case ErrorCategory::range:
      return "range";
    case ErrorCategory::model:
      return "model";
    case ErrorCategory::numeric:
      return "numeric";
    case ErrorCategory::metric:
      return "metric";
    case ErrorCategory::internal:
      return "internal";
  }
  return "internal";
}

}  // namespace crcvote
