#pragma once

#include <cstdint>
#include <span>

namespace orchestra {

enum class RngPurpose : std::uint64_t {
  kMask = 1,
  kRollout = 2,
  kTrajectory = 3,
  kInitialState = 4,
  kRunSeed = 5,
  kGenerator = 6,
};

inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/**
 * Splitmix64 stream whose starting point is a hash of a derivation path
 * (root seed, round, state, action, purpose). Equal paths give equal streams,
 * so results do not depend on the order in which streams are consumed.
 */
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : state_(seed) {}

  static RngStream derive(std::uint64_t root, std::uint64_t round,
                          std::uint64_t state, std::uint64_t action,
                          RngPurpose purpose) {
    std::uint64_t h = mix64(root + 0x9e3779b97f4a7c15ULL);
    h = mix64(h ^ (round + 0x632be59bd9b4e019ULL));
    h = mix64(h ^ (state + 0x8cb92ba72f3d8dd7ULL));
    h = mix64(h ^ (action + 0xd6e8feb86659fd93ULL));
    h = mix64(h ^ static_cast<std::uint64_t>(purpose));
    return RngStream(h);
  }

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix64(state_);
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return uniform() < p; }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    // Lemire's multiply-shift with rejection.
    unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * n;
    auto low = static_cast<std::uint64_t>(m);
    if (low < n) {
      const std::uint64_t threshold = -n % n;
      while (low < threshold) {
        m = static_cast<unsigned __int128>(next_u64()) * n;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  /// Index drawn from nonnegative weights summing to one.
  int categorical(std::span<const double> probs) {
    double u = uniform();
    const int last = static_cast<int>(probs.size()) - 1;
    for (int i = 0; i < last; ++i) {
      if (u < probs[i]) return i;
      u -= probs[i];
    }
    // Skip trailing zero-mass entries left by rounding.
    int i = last;
    while (i > 0 && probs[i] <= 0.0) --i;
    return i;
  }

 private:
  std::uint64_t state_;
};

}  // namespace orchestra
