#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace memtangle {

// splitmix64 step; advances x and returns the next output.
std::uint64_t splitmix64_next(std::uint64_t& x);

// FNV-1a 64-bit hash of a byte string.
std::uint64_t fnv1a64(std::string_view s);

// PCG32 (pcg_oneseq XSH-RR variant with explicit stream). Every random
// decision in the project flows through one of these, keyed by a 64-bit
// seed plus a purpose string that selects the stream increment, so runs
// are bit-reproducible across platforms.
class Pcg32 {
 public:
  Pcg32(std::uint64_t seed, std::string_view purpose);

  std::uint32_t next_u32();

  // Unbiased integer in [0, bound). bound must be nonzero.
  std::uint32_t next_below(std::uint32_t bound);

  // Uniform double in [0, 1) with 32 bits of precision.
  double next_double();

  // Standard normal via Box-Muller on PCG32 outputs. Pairs are generated
  // together and the second value cached.
  double next_gaussian();

  // Seeded Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    if (v.size() < 2) return;
    for (std::size_t i = v.size() - 1; i > 0; --i) {
      std::size_t j = next_below(static_cast<std::uint32_t>(i + 1));
      std::swap(v[i], v[j]);
    }
  }

 private:
  std::uint64_t state_;
  std::uint64_t inc_;
  double cached_gaussian_ = 0.0;
  bool has_cached_gaussian_ = false;
};

}  // namespace memtangle
