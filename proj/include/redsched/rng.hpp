#pragma once

// Seeded random streams: substream derivation plus the couple of
// inverse-transform samplers the simulator needs. Sequences depend only on
// the seed, not on the standard library's distribution internals.

#include <cmath>
#include <cstdint>
#include <random>

namespace redsched::rng {

using Engine = std::mt19937_64;

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Seed for substream `stream`. Stream 0 is the seed itself, so a
// single-replication run equals a direct run with the same seed.
constexpr std::uint64_t derive_seed(std::uint64_t seed,
                                    std::uint64_t stream) noexcept {
  return stream == 0 ? seed : mix64(seed + stream * 0xD1B54A32D192ED03ull);
}

inline Engine make_engine(std::uint64_t seed) { return Engine(mix64(seed)); }

// Uniform integer in [0, bound), bound >= 1, by rejection.
inline std::uint64_t uniform_below(Engine& g, std::uint64_t bound) {
  const std::uint64_t limit = ~std::uint64_t{0} - ~std::uint64_t{0} % bound;
  std::uint64_t x;
  do {
    x = g();
  } while (x >= limit);
  return x % bound;
}

// Uniform double in (0, 1]; excludes 0 so log() stays finite.
inline double uniform_unit(Engine& g) {
  return static_cast<double>((g() >> 11) + 1) * 0x1.0p-53;
}

// Exponential draw with the given rate, by inverse transform.
inline double exponential(Engine& g, double rate) {
  return -std::log(uniform_unit(g)) / rate;
}

} // namespace redsched::rng
