#pragma once

// Portable seeded randomness. The standard distributions are implementation
// defined, so the few we need are spelled out here on top of mt19937_64.

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string_view>

namespace mgdl {

/// splitmix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

/// Seed of the named sub-stream of `master` (FNV-1a of the name, mixed).
std::uint64_t derive_seed(std::uint64_t master, std::string_view stream);

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, bound), rejection sampled.
  std::uint64_t below(std::uint64_t bound);
  /// Standard normal via the Box-Muller transform; the second variate of each
  /// pair is cached.
  double normal();

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace mgdl
