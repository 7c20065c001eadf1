#pragma once

#include <cmath>

namespace crcvote::detail {

inline double sigmoid(double t) {
  if (t >= 0.0) {
    return 1.0 / (1.0 + std::exp(-t));
  }
  double e = std::exp(t);
  return e / (1.0 + e);
}

/// log(1 + exp(t)) without overflow.
inline double softplus(double t) {
  if (t > 0.0) {
    return t + std::log1p(std::exp(-t));
  }
  return std::log1p(std::exp(t));
}

}  // namespace crcvote::detail
