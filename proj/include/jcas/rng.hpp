#pragma once

#include <cstdint>
#include <random>

namespace jcas {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Stream identifiers. Each consumer of randomness inside a trial gets its own
/// stream so that changing one part of the simulation does not shift another.
enum class Stream : std::uint64_t {
  layout = 1,
  slot_a = 2,
  slot_b = 3,
  fresh_layout = 4,
  false_alarm = 5,
  coverage = 6,
  laplace = 7,
  conditional = 8,
  test = 99,
};

/// Seed for (base_seed, trial, stream). Pure function; streams never share state.
inline std::uint64_t derive_seed(std::uint64_t base_seed, std::uint64_t trial, Stream stream) {
  std::uint64_t h = splitmix64(base_seed);
  h = splitmix64(h ^ splitmix64(trial + 0x632be59bd9b4e019ULL));
  return splitmix64(h ^ static_cast<std::uint64_t>(stream));
}

inline Rng make_stream(std::uint64_t base_seed, std::uint64_t trial, Stream stream) {
  return Rng{derive_seed(base_seed, trial, stream)};
}

inline double uniform01(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

inline bool bernoulli(Rng& rng, double p) {
  // Always consumes exactly one draw so paired runs stay aligned.
  return uniform01(rng) < p;
}

} // namespace jcas
