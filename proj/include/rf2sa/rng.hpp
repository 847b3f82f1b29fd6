#pragma once

#include <cmath>
#include <cstdint>

namespace rf2sa::rng {

// splitmix64: tiny counter-based generator. Trajectories must reproduce
// bit-identically for a given seed, independent of libstdc++'s distribution
// internals, so both the generator and the gaussian transform are pinned here.
inline std::uint64_t splitmix64_next(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

inline std::uint64_t mix(std::uint64_t h, std::uint64_t v) {
  h ^= v + 0x9E3779B97F4A7C15ull + (h << 6) + (h >> 2);
  std::uint64_t s = h;
  return splitmix64_next(s);
}

/// Deterministic substream key for sample (k, t, channel) of a run seeded
/// with `seed`. Keys are order-independent: drawing streams in any order
/// yields the same values.
inline std::uint64_t derive_key(std::uint64_t seed, std::uint64_t k, std::uint64_t t,
                                std::uint64_t channel) {
  return mix(mix(mix(seed, k), t), channel);
}

class Stream {
 public:
  explicit Stream(std::uint64_t key) : state_(key) {}

  std::uint64_t next_u64() { return splitmix64_next(state_); }

  /// Uniform in [0, 1) with 53 random bits.
  double next_uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Standard normal via Box-Muller (cache-free; platform-independent).
  double next_gaussian() {
    double u1 = next_uniform();
    double u2 = next_uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

 private:
  std::uint64_t state_;
};

}  // namespace rf2sa::rng
