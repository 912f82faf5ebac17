#pragma once

#include <cstdint>
#include <random>

#include "opaque/types.hpp"

namespace opaque {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed of stream `index` under master `seed`. Streams are independent of
/// the order in which they are created, so parallel schedules reproduce.
constexpr std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t index) {
  return splitmix64(splitmix64(seed) ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}
  RandomStream(std::uint64_t seed, std::uint64_t index) : engine_(stream_seed(seed, index)) {}

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double normal() { return normal_(engine_); }

  /// Draws an index from a probability vector by inverse CDF.
  template <typename Derived>
  Index categorical(const Eigen::DenseBase<Derived>& probabilities) {
    const double u = uniform();
    double cumulative = 0.0;
    Index last_positive = 0;
    for (Index i = 0; i < probabilities.size(); ++i) {
      const double p = probabilities(i);
      if (p <= 0.0) continue;
      cumulative += p;
      last_positive = i;
      if (u < cumulative) return i;
    }
    return last_positive;
  }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
};

}  // namespace opaque
