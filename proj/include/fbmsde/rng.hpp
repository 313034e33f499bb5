#pragma once

#include <cmath>
#include <cstdint>

namespace fbmsde {

/// Splittable 64-bit generator (SplitMix64 core). Streams for Monte Carlo
/// paths are derived as
///   state0(seed, path_index) = mix(seed + (path_index + 1) * GAMMA)
/// so every path is reproducible from (seed, path_index) alone, independent
/// of scheduling or execution order.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : state_(mix(seed)) {}

  /// Seed of path stream k; RandomStream(derive_seed(seed, k)) equals
  /// for_path(seed, k).
  static std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t path_index) {
    return seed + (path_index + 1) * kGamma;
  }

  static RandomStream for_path(std::uint64_t seed, std::uint64_t path_index) {
    return RandomStream(derive_seed(seed, path_index));
  }

  std::uint64_t next_u64() {
    state_ += kGamma;
    return mix(state_);
  }

  /// Uniform draw strictly inside (0, 1).
  double next_uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller; consumes exactly two uniforms per call,
  /// no cached spare, so the stream position is a pure function of the call
  /// count.
  double next_gaussian() {
    const double u1 = next_uniform();
    const double u2 = next_uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
  }

 private:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;
  static constexpr double kPi = 3.14159265358979323846;

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
};

}  // namespace fbmsde
