#pragma once

#include <cstdint>
#include <random>

namespace bxr {

/// Seeded random stream. split(i) yields an independent child stream, so work
/// can be partitioned deterministically regardless of scheduling.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed, std::uint64_t stream = 0);

  RandomStream split(std::uint64_t child) const;

  double uniform();                   // [0, 1)
  double uniform(double lo, double hi);
  double normal();                    // N(0, 1)
  std::uint64_t next_u64() { return engine_(); }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace bxr
