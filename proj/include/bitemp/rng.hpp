#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace bitemp::rng {

// Counter-based generator: splitmix64 output function applied to
// key + counter * golden ratio. Every draw is a pure function of
// (seed, counter), so parallel evaluation order can never change results.
inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t counter_bits(std::uint64_t seed, std::uint64_t counter) {
  return mix64(mix64(seed + kGolden) + counter * kGolden);
}

// Uniform in the open interval (0, 1).
inline double counter_uniform(std::uint64_t seed, std::uint64_t counter) {
  return (static_cast<double>(counter_bits(seed, counter) >> 11) + 0.5) *
         0x1.0p-53;
}

// Standard normal via Box-Muller on two counter draws.
inline double counter_gauss(std::uint64_t seed, std::uint64_t counter) {
  const double u1 = counter_uniform(seed, 2 * counter);
  const double u2 = counter_uniform(seed, 2 * counter + 1);
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

inline constexpr const char* kAlgorithmName = "splitmix64-counter/box-muller";

// Sequential convenience stream over the same counter generator.
class Stream {
public:
  explicit Stream(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t next_bits() { return counter_bits(seed_, counter_++); }
  double uniform() { return counter_uniform(seed_, counter_++); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double gauss() { return counter_gauss(seed_, counter_++); }
  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return next_bits() % n; }

private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

}  // namespace bitemp::rng
