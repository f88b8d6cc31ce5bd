#pragma once

#include <cstdint>
#include <limits>
#include <vector>

namespace isolyap {

/// xoshiro256** seeded from a 64-bit key through SplitMix64.
class Engine {
 public:
  using result_type = std::uint64_t;

  explicit Engine(std::uint64_t key);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()();

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform on (0, 1).
  double uniform_open();
  /// Standard normal (Marsaglia polar method).
  double normal();

 private:
  std::uint64_t s_[4];
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// A node in the hierarchical seed tree (seed -> experiment -> replication
/// -> step). Identical (seed, path) always yields the identical sequence.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::vector<std::uint64_t> path = {});

  [[nodiscard]] RngStream derive(std::uint64_t index) const;
  [[nodiscard]] Engine engine() const { return Engine(key_); }

  std::uint64_t seed() const { return seed_; }
  const std::vector<std::uint64_t>& path() const { return path_; }
  std::uint64_t key() const { return key_; }

 private:
  std::uint64_t seed_;
  std::vector<std::uint64_t> path_;
  std::uint64_t key_;
};

std::uint64_t splitmix64(std::uint64_t& state);

}  // namespace isolyap
