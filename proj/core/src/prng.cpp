#include "memtangle/prng.hpp"

#include <cmath>
#include <numbers>

#include "memtangle/errors.hpp"

namespace memtangle {

std::uint64_t splitmix64_next(std::uint64_t& x) {
  x += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {
constexpr std::uint64_t kPcgMult = 6364136223846793005ULL;
}

Pcg32::Pcg32(std::uint64_t seed, std::string_view purpose) {
  // Stream selection: hash of the purpose string, forced odd.
  inc_ = (fnv1a64(purpose) << 1u) | 1u;
  std::uint64_t s = seed;
  std::uint64_t initstate = splitmix64_next(s);
  state_ = 0;
  next_u32();
  state_ += initstate;
  next_u32();
}

std::uint32_t Pcg32::next_u32() {
  std::uint64_t old = state_;
  state_ = old * kPcgMult + inc_;
  auto xorshifted =
      static_cast<std::uint32_t>(((old >> 18u) ^ old) >> 27u);
  auto rot = static_cast<std::uint32_t>(old >> 59u);
  return (xorshifted >> rot) | (xorshifted << ((32u - rot) & 31u));
}

std::uint32_t Pcg32::next_below(std::uint32_t bound) {
  if (bound == 0) throw ConfigError("Pcg32::next_below: bound must be > 0");
  // Rejection threshold for an unbiased result.
  std::uint32_t threshold = (0u - bound) % bound;
  for (;;) {
    std::uint32_t r = next_u32();
    if (r >= threshold) return r % bound;
  }
}

double Pcg32::next_double() {
  return next_u32() * 0x1p-32;
}

double Pcg32::next_gaussian() {
  if (has_cached_gaussian_) {
    has_cached_gaussian_ = false;
    return cached_gaussian_;
  }
  // u1 in (0, 1] so the log is finite.
  double u1 = (static_cast<double>(next_u32()) + 1.0) * 0x1p-32;
  double u2 = next_double();
  double r = std::sqrt(-2.0 * std::log(u1));
  double theta = 2.0 * std::numbers::pi * u2;
  cached_gaussian_ = r * std::sin(theta);
  has_cached_gaussian_ = true;
  return r * std::cos(theta);
}

}  // namespace memtangle
