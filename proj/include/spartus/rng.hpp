#pragma once

// Counter-based deterministic random numbers. Every draw is a pure hash of
// (seed, stream counters), so parallel callers get identical results
// regardless of evaluation order.

#include <cstdint>

namespace spartus {

// splitmix64 finalizer (Steele, Lea, Flood 2014).
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t hash_combine(std::uint64_t h, std::uint64_t v) {
  return splitmix64(h ^ (v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2)));
}

// Hash an arbitrary key tuple down to one 64-bit word.
template <typename... Keys>
std::uint64_t hash_key(std::uint64_t seed, Keys... keys) {
  std::uint64_t h = splitmix64(seed);
  ((h = hash_combine(h, static_cast<std::uint64_t>(keys))), ...);
  return h;
}

// Uniform double in [0, 1) from a hashed key.
inline double uniform01(std::uint64_t hashed) {
  return static_cast<double>(hashed >> 11) * 0x1.0p-53;
}

// Small sequential generator for shuffles and sampling; seeded from a
// hashed key so streams stay independent.
class SplitMix {
 public:
  explicit SplitMix(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Unbiased-enough draw in [0, n) for sampling use (n << 2^64).
  std::uint64_t next_below(std::uint64_t n) { return next() % n; }

  double next_unit() { return uniform01(next()); }

 private:
  std::uint64_t state_;
};

}  // namespace spartus
