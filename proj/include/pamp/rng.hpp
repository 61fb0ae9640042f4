#pragma once

// Seeded, splittable random streams.
//
// Every random quantity in the library is drawn from a named sub-stream of a
// single 64-bit root seed. A sub-stream is identified by (root, stream tag,
// index) and seeded by hashing those three through SplitMix64, so column j of
// a measurement matrix can be regenerated without touching columns 0..j-1.
//
// Engine:  xoshiro256** (Blackman & Vigna), state seeded by SplitMix64.
// Uniform: top 53 bits of a draw, scaled to [0, 1).
// Normal:  Marsaglia polar method on uniforms mapped to (-1, 1); both
//          outputs of an accepted pair are used, first the u-branch.
// Index:   Lemire's multiply-shift with rejection, unbiased on [0, n).
//
// The three transforms are fully specified here so another implementation
// can reproduce a stream bit for bit.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string_view>

namespace pamp {

inline constexpr std::uint64_t splitmix64(std::uint64_t& state) noexcept {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// FNV-1a, used to turn stream names into tags.
inline constexpr std::uint64_t fnv1a64(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Seed of sub-stream (tag, index) under `root`.
inline constexpr std::uint64_t derive_seed(std::uint64_t root, std::uint64_t tag,
                                           std::uint64_t index = 0) noexcept {
  std::uint64_t s = root;
  std::uint64_t a = splitmix64(s) ^ tag;
  std::uint64_t b = splitmix64(a) ^ index;
  return splitmix64(b);
}

inline constexpr std::uint64_t derive_seed(std::uint64_t root, std::string_view tag,
                                           std::uint64_t index = 0) noexcept {
  return derive_seed(root, fnv1a64(tag), index);
}

class Xoshiro256ss {
 public:
  using result_type = std::uint64_t;

  explicit Xoshiro256ss(std::uint64_t seed = 0) noexcept { reseed(seed); }

  void reseed(std::uint64_t seed) noexcept {
    std::uint64_t sm = seed;
    for (auto& w : s_) w = splitmix64(sm);
    has_spare_ = false;
  }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  /// Uniform on [0, 1).
  double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  /// Standard normal.
  double normal() noexcept {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    has_spare_ = true;
    return u * m;
  }

  /// Uniform integer on [0, n), n > 0.
  std::uint64_t index(std::uint64_t n) noexcept {
    __uint128_t m = static_cast<__uint128_t>((*this)()) * n;
    auto low = static_cast<std::uint64_t>(m);
    if (low < n) {
      const std::uint64_t threshold = (0 - n) % n;
      while (low < threshold) {
        m = static_cast<__uint128_t>((*this)()) * n;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
    return (x << k) | (x >> (64 - k));
  }

  std::array<std::uint64_t, 4> s_{};
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace pamp
