#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>

namespace mfchaos {

namespace detail {

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t combine(std::uint64_t key, std::uint64_t v) { return mix64(key ^ mix64(v + kGolden)); }

// Uniform on the open interval (0, 1) from the top 53 bits.
constexpr double to_open_unit(std::uint64_t bits) {
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

}  // namespace detail

/// What a stream is used for; keeps initial conditions, Brownian increments and
/// auxiliary draws on disjoint counter spaces.
enum class StreamPurpose : std::uint64_t { kIncrement = 0, kInitial = 1, kAuxiliary = 2 };

/// Counter-based stream: the n-th draw is a pure function of (key, n).
class CounterStream {
 public:
  explicit CounterStream(std::uint64_t key, std::uint64_t counter = 0) : key_(key), counter_(counter) {}

  [[nodiscard]] std::uint64_t bits_at(std::uint64_t n) const {
    return detail::mix64(key_ + (n + 1) * detail::kGolden);
  }

  /// Standard normal at counter n (Box-Muller on counters 2n, 2n+1).
  [[nodiscard]] double normal_at(std::uint64_t n) const {
    const double u1 = detail::to_open_unit(bits_at(2 * n));
    const double u2 = detail::to_open_unit(bits_at(2 * n + 1));
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  [[nodiscard]] double uniform_at(std::uint64_t n) const { return detail::to_open_unit(bits_at(2 * n)); }

  double normal() { return normal_at(counter_++); }
  double uniform() { return uniform_at(counter_++); }
  double uniform(double a, double b) { return a + (b - a) * uniform(); }
  /// +1 or -1 with equal probability.
  double rademacher() { return (bits_at(2 * counter_++) >> 63) != 0U ? 1.0 : -1.0; }

  [[nodiscard]] std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_;
};

/// Master seed plus the (replication, particle, step) stream scheme.
///
/// The Brownian increment of coordinate j at step k for particle stream s in
/// replication r depends only on (seed, r, s, k, j), so any decomposition of
/// the work across threads reproduces the same numbers.
class RngPlan {
 public:
  explicit RngPlan(std::uint64_t master_seed) : seed_(master_seed), key_(detail::mix64(master_seed)) {}

  [[nodiscard]] std::uint64_t master_seed() const { return seed_; }

  /// Independent plan for a labelled sub-task (Picard iteration, study leg, ...).
  [[nodiscard]] RngPlan substream(std::uint64_t tag) const {
    RngPlan p(seed_);
    p.key_ = detail::combine(key_ ^ 0x5bd1e9955bd1e995ULL, tag);
    return p;
  }

  [[nodiscard]] CounterStream stream(std::uint64_t replication, std::uint64_t particle,
                                     StreamPurpose purpose = StreamPurpose::kIncrement) const {
    std::uint64_t k = detail::combine(key_, replication);
    k = detail::combine(k, particle);
    k = detail::combine(k, static_cast<std::uint64_t>(purpose));
    return CounterStream(k);
  }

  /// Writes the m Brownian increments N(0, h I) of step `step` into out.
  void increments(std::uint64_t replication, std::uint64_t particle, std::size_t step, double h,
                  std::span<double> out) const {
    const CounterStream s = stream(replication, particle);
    const double sd = std::sqrt(h);
    const std::uint64_t base = static_cast<std::uint64_t>(step) * out.size();
    for (std::size_t j = 0; j < out.size(); ++j) out[j] = sd * s.normal_at(base + j);
  }

 private:
  std::uint64_t seed_;
  std::uint64_t key_;
};

}  // namespace mfchaos
