#pragma once

#include <array>
#include <cstdint>
#include <string_view>

namespace layercard {

// FNV-1a 64-bit hash. Used to derive substream identifiers from labels and
// to fingerprint canonical serializations.
std::uint64_t fnv1a64(std::string_view s);

// Philox4x32-10 block cipher (counter-based random numbers). The output is a
// pure function of (key, counter), so any block can be generated without
// advancing through its predecessors and forked streams never collide.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

// Deterministic generator over a (seed, stream) pair. Identical construction
// arguments reproduce the identical sequence on every platform; fork(label)
// derives an independent stream keyed by the label hash, which keeps
// per-layer and per-instance draws stable under reordering.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0);

  CounterRng fork(std::string_view label) const;

  std::uint32_t next_u32();
  std::uint64_t next_u64();

  // Uniform on [0,1) with 53 random bits.
  double uniform();
  // Uniform on [lo,hi).
  double uniform(double lo, double hi);
  // Uniform integer on [lo,hi], inclusive, rejection sampled (no modulo bias).
  int uniform_int(int lo, int hi);
  // Standard normal via Box-Muller; pairs are cached.
  double normal();

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

 private:
  void refill();

  std::uint64_t seed_ = 0;
  std::uint64_t stream_ = 0;
  std::array<std::uint32_t, 2> key_{};
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  int position_ = 4;
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

}  // namespace layercard
