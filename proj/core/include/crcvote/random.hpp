#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace crcvote {

/// Derives an independent seed for a named substream of `seed`.
///
/// Every stochastic component draws from its own substream, so adding draws
/// in one component never shifts the numbers another component sees. The
/// mapping is splitmix64(seed ^ fnv1a64(name)), iterated twice.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view name);
std::uint64_t derive_seed(std::uint64_t seed, std::string_view name, std::uint64_t index);

/// Seeded generator with platform-independent variate transforms.
///
/// The standard library distributions are implementation-defined, so the
/// uniform, normal and index transforms are written out here to keep seeded
/// datasets byte-identical across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Standard normal via Box-Muller; one variate per call.
  double normal();
  double normal(double mean, double sd) { return mean + sd * normal(); }
  bool bernoulli(double p) { return uniform() < p; }
  /// Uniform integer in [0, n). Requires n > 0.
  std::uint64_t index(std::uint64_t n);

  template <typename It>
  void shuffle(It first, It last) {
    auto n = static_cast<std::uint64_t>(last - first);
    for (std::uint64_t i = n; i > 1; --i) {
      auto j = index(i);
      std::swap(first[i - 1], first[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace crcvote
