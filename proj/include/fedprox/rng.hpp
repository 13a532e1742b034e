#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <span>

namespace fedprox {

// Purpose tags for stream derivation. Each random decision in a run derives its
// own stream from (master_seed, purpose, round, device, ...) so that parallel
// device solves never share generator state and replay is order-independent.
namespace stream_tag {
inline constexpr std::uint32_t kDeviceSampling = 1;
inline constexpr std::uint32_t kMinibatch = 2;
inline constexpr std::uint32_t kFeatures = 3;
inline constexpr std::uint32_t kNoise = 4;
inline constexpr std::uint32_t kGroundTruth = 5;
inline constexpr std::uint32_t kTStar = 6;
inline constexpr std::uint32_t kProbes = 7;
inline constexpr std::uint32_t kStability = 8;
inline constexpr std::uint32_t kLocalSgd = 9;
}  // namespace stream_tag

// Counter-based random stream. The key is a splitmix64-style fold of the master
// seed and the path tags; draw i is the splitmix64 finalizer applied to
// key + (i+1)*gamma. Identical (seed, path) gives an identical sequence, and the
// output is a pure function of (key, counter), so streams can be created and
// consumed in any order across threads.
class RngStream {
 public:
  RngStream(std::uint64_t master_seed, std::span<const std::uint32_t> path) {
    key_ = mix(master_seed + kGamma);
    for (std::uint32_t tag : path) {
      key_ = mix(key_ ^ (static_cast<std::uint64_t>(tag) + 0x9E3779B97F4A7C15ULL + (key_ << 6) + (key_ >> 2)));
    }
  }

  RngStream(std::uint64_t master_seed, std::initializer_list<std::uint32_t> path)
      : RngStream(master_seed, std::span<const std::uint32_t>(path.begin(), path.size())) {}

  std::uint64_t next_u64() { return mix(key_ + (++counter_) * kGamma); }

  // Uniform draw in [0, 1) with 53 bits of precision.
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n). Multiply-shift reduction; the bias of n/2^64 is
  // far below every statistical tolerance used in this project.
  std::uint64_t next_below(std::uint64_t n) {
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  // Standard normal via Box-Muller. One value per pair of uniforms; nothing is
  // cached, so draw counts stay predictable for replay.
  double next_normal() {
    double u1 = next_unit();
    const double u2 = next_unit();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

}  // namespace fedprox
