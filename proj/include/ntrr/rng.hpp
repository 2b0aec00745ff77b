#pragma once

// Counter-based random numbers. A generator is addressed by (seed, stream);
// the n-th draw is a pure function of (seed, stream, n), so any consumer can
// reproduce any other consumer's sequence (e.g. the dropout mask of one R-Drop
// branch) without sharing state.

#include <cstdint>

namespace ntrr {

enum class StreamPurpose : std::uint64_t {
  init = 1,
  dropout = 2,
  shuffle = 3,
  permutation = 4,
  split = 5,
  synthetic = 6,
  test = 7,
};

class Rng {
 public:
  Rng(std::uint64_t seed, std::uint64_t stream);

  /// Stream id for a purpose and its coordinates (step, branch, item index).
  static std::uint64_t stream_id(StreamPurpose purpose, std::uint64_t step = 0, std::uint64_t branch = 0,
                                 std::uint64_t index = 0);

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream() const noexcept { return stream_; }
  std::uint64_t counter() const noexcept { return counter_; }

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  /// Uniform integer in [0, bound); bound > 0.
  std::uint64_t below(std::uint64_t bound);
  /// Standard normal (Box-Muller, one value per two uniforms).
  double normal();

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

/// SplitMix64 finaliser; exposed for hashing stream coordinates.
std::uint64_t mix64(std::uint64_t x);

}  // namespace ntrr
