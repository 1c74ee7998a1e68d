#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>

namespace cfsim {

/// Counter-based pseudo-random generator (SplitMix64 output function).
///
/// The generator is a pure function of (stream key, counter), so any draw can
/// be reproduced without replaying the sequence, and independent streams are
/// derived by hashing child identifiers into the key. Experiment code derives
/// one stream per (seed, purpose, subject, pose, replicate) tuple; identical
/// tuples yield identical draws on every platform and worker count.
class CounterRng {
public:
  explicit CounterRng(std::uint64_t key) : key_(key) {}

  /// Derive an independent child stream from this one.
  CounterRng stream(std::initializer_list<std::uint64_t> ids) const {
    std::uint64_t k = key_;
    for (std::uint64_t id : ids) {
      k = mix(k ^ mix(id + kGamma));
    }
    return CounterRng(k);
  }

  CounterRng stream(std::uint64_t a) const { return stream({a}); }
  CounterRng stream(std::uint64_t a, std::uint64_t b) const { return stream({a, b}); }
  CounterRng stream(std::uint64_t a, std::uint64_t b, std::uint64_t c) const {
    return stream({a, b, c});
  }

  /// Stream key, usable as a derived seed.
  std::uint64_t key() const { return key_; }

  std::uint64_t next_u64() { return mix(key_ + (++counter_) * kGamma); }

  /// Uniform double in [0, 1) with 53-bit resolution.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in the inclusive range [lo, hi].
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<std::int64_t>(bounded(span));
  }

  /// Standard normal via Box-Muller (one value per call, no caching, so the
  /// draw count per stream stays deterministic).
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  /// Normal truncated to (lo, hi) by rejection.
  double truncated_normal(double mean, double stddev, double lo, double hi) {
    for (;;) {
      const double x = normal(mean, stddev);
      if (x > lo && x < hi) return x;
    }
  }

  static std::uint64_t mix(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ULL;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBULL;
    z ^= z >> 31;
    return z;
  }

private:
  // Debiased multiply-shift bound; rejection keeps the distribution exact.
  std::uint64_t bounded(std::uint64_t n) {
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      const std::uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;
  static constexpr double kPi = 3.14159265358979323846;

  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

}  // namespace cfsim
