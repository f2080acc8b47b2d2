#include "layercard/rng.hpp"

#include <cmath>

#include "layercard/errors.hpp"

namespace layercard {

std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

inline std::uint32_t mulhi32(std::uint32_t a, std::uint32_t b) {
  return static_cast<std::uint32_t>(
      (static_cast<std::uint64_t>(a) * static_cast<std::uint64_t>(b)) >> 32);
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key) {
  for (int round = 0; round < 10; ++round) {
    const std::uint32_t hi0 = mulhi32(kPhiloxM0, counter[0]);
    const std::uint32_t lo0 = kPhiloxM0 * counter[0];
    const std::uint32_t hi1 = mulhi32(kPhiloxM1, counter[2]);
    const std::uint32_t lo1 = kPhiloxM1 * counter[2];
    counter = {hi1 ^ counter[1] ^ key[0], lo1,
               hi0 ^ counter[3] ^ key[1], lo0};
    key[0] += kPhiloxW0;
    key[1] += kPhiloxW1;
  }
  return counter;
}

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t stream)
    : seed_(seed), stream_(stream) {
  key_ = {static_cast<std::uint32_t>(seed & 0xffffffffu),
          static_cast<std::uint32_t>(seed >> 32)};
}

CounterRng CounterRng::fork(std::string_view label) const {
  // Substream id mixes the label hash with the parent stream through an odd
  // multiplier, so distinct (parent, label) pairs map to distinct streams.
  const std::uint64_t child = fnv1a64(label) ^ (stream_ * 0x9E3779B97F4A7C15ull + 0x632BE59BD9B4E019ull);
  return CounterRng(seed_, child);
}

void CounterRng::refill() {
  const std::array<std::uint32_t, 4> counter = {
      static_cast<std::uint32_t>(block_ & 0xffffffffu),
      static_cast<std::uint32_t>(block_ >> 32),
      static_cast<std::uint32_t>(stream_ & 0xffffffffu),
      static_cast<std::uint32_t>(stream_ >> 32)};
  buffer_ = philox4x32(counter, key_);
  ++block_;
  position_ = 0;
}

std::uint32_t CounterRng::next_u32() {
  if (position_ >= 4) refill();
  return buffer_[position_++];
}

std::uint64_t CounterRng::next_u64() {
  const std::uint64_t hi = next_u32();
  const std::uint64_t lo = next_u32();
  return (hi << 32) | lo;
}

double CounterRng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double CounterRng::uniform(double lo, double hi) {
  return lo + (hi - lo) * uniform();
}

int CounterRng::uniform_int(int lo, int hi) {
  if (lo > hi) throw InvalidArgument("uniform_int: empty range");
  const std::uint64_t span = static_cast<std::uint64_t>(hi) - static_cast<std::uint64_t>(lo) + 1;
  if (span == 0) return static_cast<int>(next_u32());  // full 32-bit range
  const std::uint64_t limit = (0x100000000ull / span) * span;
  std::uint64_t draw;
  do {
    draw = next_u32();
  } while (draw >= limit);
  return static_cast<int>(lo + static_cast<std::int64_t>(draw % span));
}

double CounterRng::normal() {
  if (has_cached_normal_) {
    has_cached_normal_ = false;
    return cached_normal_;
  }
  // Box-Muller on (0,1] x [0,1) uniforms; u1 is flipped away from zero so the
  // logarithm stays finite.
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 6.283185307179586476925286766559 * u2;
  cached_normal_ = radius * std::sin(angle);
  has_cached_normal_ = true;
  return radius * std::cos(angle);
}

}  // namespace layercard
