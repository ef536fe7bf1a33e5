#pragma once

#include <cstdint>
#include <random>

namespace eqtsp {

/// Deterministic random stream. The engine is std::mt19937_64, whose output
/// sequence is fixed by the standard; the conversions below are written out
/// by hand so draws are identical across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n) {
    // Rejection sampling keeps the draw unbiased.
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t v = engine_();
    while (v >= limit) v = engine_();
    return v % n;
  }

  int below(int n) { return static_cast<int>(below(static_cast<std::uint64_t>(n))); }

  /// Independent child stream, keyed by an index. Children of the same
  /// parent seed with the same key are identical no matter how much the
  /// parent has been consumed.
  Rng child(std::uint64_t key) const { return Rng(mix(seed_ ^ mix(key + 0x9e3779b97f4a7c15ULL))); }

  static std::uint64_t mix(std::uint64_t z) {
    // splitmix64 finalizer
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace eqtsp
