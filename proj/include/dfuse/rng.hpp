#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace dfuse {

/// MurmurHash3 64-bit finalizer (full avalanche).
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z ^= z >> 33;
  z *= 0xff51afd7ed558ccdULL;
  z ^= z >> 33;
  z *= 0xc4ceb9fe1a85ec53ULL;
  z ^= z >> 33;
  return z;
}

/// Counter-based random stream. The state is a hash of
/// (seed, stream, counter), so the stream for e.g. (hypothesis, trial) can be
/// opened independently by any worker and always yields the same sequence;
/// results never depend on how trials are partitioned across threads.
/// Output sequence is splitmix64.
class TrialRng {
 public:
  TrialRng(std::uint64_t seed, std::uint64_t stream,
           std::uint64_t counter) noexcept {
    std::uint64_t h = mix64(seed ^ 0x9e3779b97f4a7c15ULL);
    h = mix64(h ^ (stream * 0xbf58476d1ce4e5b9ULL));
    state_ = mix64(h ^ (counter * 0x94d049bb133111ebULL));
  }

  std::uint64_t next_u64() noexcept {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform on [0,1), 53-bit resolution.
  double next_double() noexcept {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  bool next_bernoulli(double p) noexcept { return next_double() < p; }

  /// Standard normal via Box-Muller; consumes exactly two uniforms per pair.
  double next_normal() noexcept {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - next_double();  // (0,1], keeps log finite
    const double u2 = next_double();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

 private:
  std::uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace dfuse
