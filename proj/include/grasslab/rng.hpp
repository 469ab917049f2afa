#pragma once

#include <cstdint>
#include <vector>

namespace grasslab {

/// Deterministic splittable random stream.
///
/// The generator core is xoshiro256**, seeded through splitmix64, so the
/// sequence depends only on the stream key and never on platform library
/// details. Independent substreams are derived with child(index): the child
/// key is a hash of (parent key, index), which is the split rule every
/// parallel loop in this project relies on. For a fixed root seed and a fixed
/// chunking of work, results do not depend on how many workers execute the
/// chunks.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed);

  /// Derive an independent stream; pure, does not advance this stream.
  RngStream child(std::uint64_t index) const;

  std::uint64_t key() const { return key_; }

  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53-bit resolution.
  double uniform();
  double uniform(double lo, double hi);
  /// Standard normal via Box-Muller (second value cached).
  double normal();
  /// Exp(1).
  double exponential();
  /// Uniform integer in [lo, hi] inclusive.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
  /// Random sign, +1 or -1.
  double sign();

 private:
  std::uint64_t key_;
  std::uint64_t s_[4];
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

/// splitmix64 finalizer; also used for digest-style key mixing.
std::uint64_t mix64(std::uint64_t x);

}  // namespace grasslab
