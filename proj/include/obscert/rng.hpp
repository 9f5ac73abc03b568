#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace obscert {

/// SplitMix64 output function.
inline constexpr std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ULL;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Role of a random substream within one scenario draw.
enum class StreamRole : std::uint64_t {
  TrueState = 1,
  TrueParam = 2,
  InputProfile = 3,
  NoiseProfile = 4,
  CandState = 5,
  CandParam = 6,
  MheStart = 7,
};

/// Counter-based random substream keyed by (seed, id, role, attempt).
///
/// Streams with distinct keys are independent, so scenarios can be drawn in
/// any order and on any thread with identical results.
class SubStream {
 public:
  SubStream(std::uint64_t seed, std::uint64_t id, StreamRole role,
            std::uint64_t attempt = 0) {
    std::uint64_t k = mix64(seed ^ 0xA0761D6478BD642FULL);
    k = mix64(k + 0x9E3779B97F4A7C15ULL * (id + 1));
    k = mix64(k + 0xE7037ED1A0B428DBULL * static_cast<std::uint64_t>(role));
    k = mix64(k + 0x8EBC6AF09C88C6E3ULL * (attempt + 1));
    state_ = k;
  }

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    return mix64(state_);
  }

  /// Uniform in [0, 1), 53-bit resolution.
  double next_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

  /// Standard normal via Box-Muller; the second deviate of each pair is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - next_unit();  // (0, 1], keeps log finite
    const double u2 = next_unit();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(t);
    has_spare_ = true;
    return r * std::cos(t);
  }

 private:
  std::uint64_t state_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace obscert
