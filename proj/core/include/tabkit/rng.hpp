#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace tabkit {

// Deterministic random source used everywhere in the library.
//
// The engine is std::mt19937_64, whose output sequence is fixed by the C++
// standard, and all derivations below avoid std::*_distribution (whose
// output is implementation-defined). A given seed therefore produces the
// same stream on every platform and toolchain.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller; consumes exactly two draws.
  double normal();

  // Unbiased integer in [0, n) via rejection sampling.
  std::size_t uniform_index(std::size_t n);

  // Fisher-Yates.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = uniform_index(i);
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

// Fixed sub-seed offsets deriving per-purpose streams from the session seed.
namespace seed_offset {
inline constexpr std::uint64_t kSplit = 1;
inline constexpr std::uint64_t kShuffle = 2;
inline constexpr std::uint64_t kDropout = 3;
inline constexpr std::uint64_t kInit = 4;
}  // namespace seed_offset

// Per-epoch shuffle seed: golden-ratio stride keeps adjacent epochs apart.
inline std::uint64_t epoch_seed(std::uint64_t shuffle_seed, std::uint64_t epoch) {
  return shuffle_seed + epoch * 0x9E3779B97F4A7C15ULL;
}

}  // namespace tabkit
