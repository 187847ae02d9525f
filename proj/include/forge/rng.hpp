#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace forge {

/// Philox4x32-10 block function (Salmon et al., Random123). Pure function of
/// (counter, key), which is what makes the streams below schedule-independent.
inline std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                               std::array<std::uint32_t, 2> key) {
  constexpr std::uint32_t kM0 = 0xD2511F53u;
  constexpr std::uint32_t kM1 = 0xCD9E8D57u;
  constexpr std::uint32_t kW0 = 0x9E3779B9u;
  constexpr std::uint32_t kW1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = std::uint64_t{kM0} * ctr[0];
    const std::uint64_t p1 = std::uint64_t{kM1} * ctr[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kW0;
    key[1] += kW1;
  }
  return ctr;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return h;
}

/// Stable per-asset seed: independent of manifest order and of the platform.
inline std::uint64_t derive_seed(std::uint64_t global_seed, std::string_view asset_key) {
  return splitmix64(global_seed ^ splitmix64(fnv1a64(asset_key)));
}

/// Sequential draws for one logical item (sample index) within a stream.
class Draws {
 public:
  Draws(std::array<std::uint32_t, 2> key, std::uint64_t item, std::uint32_t stream)
      : key_(key), item_(item), stream_(stream) {}

  std::uint32_t next_u32() {
    if (pos_ == 4) {
      block_ = philox4x32({static_cast<std::uint32_t>(item_), static_cast<std::uint32_t>(item_ >> 32),
                           block_index_++, stream_},
                          key_);
      pos_ = 0;
    }
    return block_[pos_++];
  }

  std::uint64_t next_u64() {
    const std::uint64_t hi = next_u32();
    return (hi << 32) | next_u32();
  }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller; consumes exactly four words.
  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::array<std::uint32_t, 2> key_;
  std::uint64_t item_;
  std::uint32_t stream_;
  std::uint32_t block_index_ = 0;
  std::array<std::uint32_t, 4> block_{};
  int pos_ = 4;
};

/// Stream ids for the purposes a single asset draws randomness for.
enum class StreamId : std::uint32_t {
  kSurface = 1,
  kSharp = 2,
  kNear = 3,
  kVolume = 4,
  kCameras = 5,
  kOnSurface = 6,
  kReference = 7,
  kFlow = 8,
};

/// Counter-based random stream: (seed, stream) names the sequence and item i
/// of it is reachable directly, so chunked parallel sampling reproduces the
/// serial result bit for bit.
class RngStream {
 public:
  static constexpr std::string_view kAlgorithm = "philox4x32-10";

  RngStream(std::uint64_t seed, std::uint32_t stream) : seed_(seed), stream_(stream) {}
  RngStream(std::uint64_t seed, StreamId stream) : RngStream(seed, static_cast<std::uint32_t>(stream)) {}

  std::uint64_t seed() const { return seed_; }
  std::uint32_t stream() const { return stream_; }

  Draws at(std::uint64_t item) const {
    return Draws({static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32)}, item, stream_);
  }

 private:
  std::uint64_t seed_;
  std::uint32_t stream_;
};

}  // namespace forge
