#pragma once

#include <cstdint>
#include <limits>
#include <random>

#include "rna/common.hpp"

namespace rna {

/// Counter-based random stream. Output i is a bijective mix of (key, i), so a
/// stream is fully determined by its key and streams derived from distinct
/// (seed, a, b) triples never share state. Satisfies
/// UniformRandomBitGenerator.
class Stream {
 public:
  using result_type = std::uint64_t;

  explicit Stream(std::uint64_t key = 0) : key_(mix(key)) {}

  /// Independent stream for (experiment seed, method index, trial index).
  static Stream derive(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
    return Stream(mix(seed) ^ mix(a + 0x632BE59BD9B4E019ULL) ^
                  mix(mix(b) + 0x85157AF5ULL));
  }

  /// Child stream; the parent is unaffected.
  Stream split(std::uint64_t index) const {
    return Stream(key_ ^ mix(index + 0xD1B54A32D192ED03ULL));
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() {
    ++counter_;
    return mix(key_ + counter_ * 0x9E3779B97F4A7C15ULL);
  }

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(*this); }
  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(*this);
  }
  double normal() { return normal_(*this); }

  /// Uniform integer in [0, n).
  std::size_t index(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(*this);
  }

  Vector normal_vector(Eigen::Index n) {
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = normal();
    return v;
  }

  std::uint64_t counter() const { return counter_; }

 private:
  // splitmix64 finalizer
  static constexpr std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace rna
