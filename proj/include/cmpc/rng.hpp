#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace cmpc {

// 64-bit finalizer with full avalanche; the basis for all randomness here.
inline constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Deterministic per-path seed: paths are independent streams addressed by
// index, so reordering or parallelizing path execution cannot change draws.
inline constexpr std::uint64_t derive_path_seed(std::uint64_t base, std::uint64_t path) {
  return mix64(mix64(base ^ 0x243f6a8885a308d3ULL) + path * 0x9e3779b97f4a7c15ULL);
}

inline constexpr std::uint64_t kProcessStream = 0;
inline constexpr std::uint64_t kMeasurementStream = 1;

// Counter-based Gaussian generator: every draw is addressed by
// (sample, substep, stream, index) and is a pure function of the seed and
// that address.  No state advances, so any draw can be regenerated in
// isolation and different streams never alias.
class CounterRng {
 public:
  explicit constexpr CounterRng(std::uint64_t seed) : seed_(seed) {}

  double normal(std::uint64_t sample, std::uint64_t substep, std::uint64_t stream,
                std::uint64_t index) const {
    std::uint64_t h = mix64(seed_ ^ 0x6a09e667f3bcc909ULL);
    h = mix64(h + sample * 0xd6e8feb86659fd93ULL);
    h = mix64(h + substep * 0xa0761d6478bd642fULL);
    h = mix64(h + stream * 0xe7037ed1a0b428dbULL);
    h = mix64(h + index * 0x8ebc6af09c88c6e3ULL);
    const std::uint64_t a = mix64(h ^ 0x589965cc75374cc3ULL);
    const std::uint64_t b = mix64(h ^ 0x1d8e4e27c47d124fULL);
    // u1 in (0, 1] keeps the log finite; u2 in [0, 1).
    const double u1 = static_cast<double>((a >> 11) + 1) * 0x1.0p-53;
    const double u2 = static_cast<double>(b >> 11) * 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
};

}  // namespace cmpc
