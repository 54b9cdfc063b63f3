#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace ybion {

// xoshiro256** 1.0 (Blackman & Vigna) seeded through SplitMix64. Every
// sampling routine below is written out so results do not depend on the
// standard library's distribution implementations.
class Xoshiro256 {
 public:
  static constexpr const char* kAlgorithm = "xoshiro256** 1.0 / splitmix64 seeding";

  explicit Xoshiro256(std::uint64_t seed) {
    std::uint64_t s = seed;
    for (auto& word : state_) word = splitmix64(s);
  }

  // Independent stream for (seed, index): the index is mixed into the seed
  // before expansion, so streams do not depend on how trials are scheduled.
  static Xoshiro256 stream(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t s = seed ^ 0x9E3779B97F4A7C15ULL;
    const std::uint64_t a = splitmix64(s);
    std::uint64_t t = index + 0xD1B54A32D192ED03ULL;
    return Xoshiro256(a ^ splitmix64(t));
  }

  std::uint64_t next() {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Exponential with unit mean.
  double exponential() { return -std::log1p(-uniform()); }

  // Standard normal via Box-Muller (one variate per call, the partner is dropped).
  double normal() {
    double u1 = uniform();
    while (u1 == 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  static std::uint64_t splitmix64(std::uint64_t& x) {
    std::uint64_t z = (x += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  std::uint64_t state_[4]{};
};

}  // namespace ybion
