#pragma once

// Deterministic random number generation for the stochastic simulator.
//
// Reproducibility contract: every independently simulated unit of work (a
// pulse, a CW time segment, a sweep point) draws from its own substream,
// derived from (seed, unit index) alone. Results are therefore identical
// for any worker count, and identical across runs with the same seed.

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "qdecay/errors.hpp"

namespace qdecay::rng {

/// One round of the splitmix64 sequence; advances `state` and returns the
/// mixed output. Used for seeding and substream derivation.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Seed for the substream of work unit `index` under master seed `base`.
/// Two splitmix rounds from a state offset by the golden ratio ensure
/// distinct, well-mixed streams for distinct (base, index) pairs.
inline std::uint64_t substream_seed(std::uint64_t base, std::uint64_t index) {
  std::uint64_t s = base + 0x9E3779B97F4A7C15ULL * (index + 1);
  (void)splitmix64(s);
  return splitmix64(s);
}

/// xoshiro256** generator: 256-bit state, 64-bit output, fast and with
/// quality far beyond what the simulation consumes.
class Xoshiro256 {
 public:
  using result_type = std::uint64_t;

  explicit Xoshiro256(std::uint64_t seed) {
    std::uint64_t st = seed;
    for (auto& w : s_) w = splitmix64(st);
    if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 0x9E3779B97F4A7C15ULL;
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }

  result_type operator()() {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }
  std::array<std::uint64_t, 4> s_{};
};

/// Uniform draw on (0, 1]: 53 random bits, shifted away from zero so that
/// log(u) is always finite.
inline double uniform01(Xoshiro256& gen) {
  return static_cast<double>((gen() >> 11) + 1) * 0x1.0p-53;
}

/// Exponential waiting time with the given rate (ns^-1).
inline double exponential(Xoshiro256& gen, double rate) {
  if (!(rate > 0.0)) throw model_error("exponential: rate must be positive");
  return -std::log(uniform01(gen)) / rate;
}

/// True with probability p. p outside [0,1] is clamped by the comparison.
inline bool bernoulli(Xoshiro256& gen, double p) {
  return uniform01(gen) <= p;
}

/// Index drawn proportionally to non-negative weights.
inline std::size_t pick_category(Xoshiro256& gen,
                                 const std::vector<double>& weights) {
  double total = 0.0;
  for (double w : weights) {
    if (w < 0.0) throw model_error("pick_category: negative weight");
    total += w;
  }
  if (!(total > 0.0)) throw model_error("pick_category: all weights zero");
  double u = uniform01(gen) * total;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    u -= weights[i];
    if (u <= 0.0) return i;
  }
  return weights.size() - 1;  // guard against accumulated rounding
}

/// Poisson draw. Multiplication method below mean 10, transformed rejection
/// with squeeze (PTRS) above — constant expected cost at any mean.
inline std::int64_t poisson(Xoshiro256& gen, double mean) {
  if (!(mean >= 0.0)) throw model_error("poisson: mean must be >= 0");
  if (mean == 0.0) return 0;
  if (mean < 10.0) {
    const double limit = std::exp(-mean);
    std::int64_t k = 0;
    double prod = uniform01(gen);
    while (prod > limit) {
      ++k;
      prod *= uniform01(gen);
    }
    return k;
  }
  const double b = 0.931 + 2.53 * std::sqrt(mean);
  const double a = -0.059 + 0.02483 * b;
  const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
  const double v_r = 0.9277 - 3.6224 / (b - 2.0);
  const double log_mean = std::log(mean);
  for (;;) {
    double u = uniform01(gen) - 0.5;
    double v = uniform01(gen);
    const double us = 0.5 - std::fabs(u);
    const double kf = std::floor((2.0 * a / us + b) * u + mean + 0.43);
    if (us >= 0.07 && v <= v_r) return static_cast<std::int64_t>(kf);
    if (kf < 0.0 || (us < 0.013 && v > us)) continue;
    const double k = kf;
    if (std::log(v * inv_alpha / (a / (us * us) + b)) <=
        k * log_mean - mean - std::lgamma(k + 1.0)) {
      return static_cast<std::int64_t>(kf);
    }
  }
}

}  // namespace qdecay::rng
