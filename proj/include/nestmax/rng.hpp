#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace nestmax {

// splitmix64 finalizer; used for seeding and for deriving stream keys.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// FNV-1a, for hashing names into stream keys and config digests.
constexpr std::uint64_t fnv1a(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// xoshiro256++ with explicit stream derivation.
//
// Split rule: the state is filled from a splitmix64 sequence seeded with
// mix64-chained (seed, k0, k1, k2).  Distinct key tuples give independent
// streams, so replicates, chains and posterior draws each own a stream and
// results do not depend on how work is scheduled across threads.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t k0 = 0,
                     std::uint64_t k1 = 0, std::uint64_t k2 = 0) noexcept {
    std::uint64_t h = seed;
    h = mix64(h ^ mix64(k0 + 0x1ULL));
    h = mix64(h ^ mix64(k1 + 0x2ULL));
    h = mix64(h ^ mix64(k2 + 0x3ULL));
    for (auto& w : state_) {
      h += 0x9e3779b97f4a7c15ULL;
      w = mix64(h);
    }
    if ((state_[0] | state_[1] | state_[2] | state_[3]) == 0) state_[0] = 1;
  }

  std::uint64_t next_u64() noexcept {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform on the open interval (0,1); 53-bit resolution.
  double uniform() noexcept {
    const double u = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    return u > 0.0 ? u : 0x1.0p-53;
  }

  // Uniform on (lo, hi).
  double uniform(double lo, double hi) noexcept {
    return lo + (hi - lo) * uniform();
  }

  double exponential() noexcept { return -std::log(uniform()); }

  // Standard normal via Box-Muller; the antithetic half is cached.
  double normal() noexcept {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double r = std::sqrt(2.0 * exponential());
    const double a = 6.283185307179586476925286766559 * uniform();
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t state_[4];
  double spare_ = 0.0;
  bool have_spare_ = false;
};

// Stream purpose tags (k0 of the split rule).
namespace stream_tag {
inline constexpr std::uint64_t simulate = 0x51;
inline constexpr std::uint64_t chain = 0x52;
inline constexpr std::uint64_t latent = 0x53;
inline constexpr std::uint64_t predictive = 0x54;
inline constexpr std::uint64_t init = 0x55;
}  // namespace stream_tag

}  // namespace nestmax
