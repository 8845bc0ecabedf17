#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>

namespace amt {

inline uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// xoshiro256++ with splitmix64 seeding. Self-contained so streams are
/// bit-identical across compilers and standard libraries.
class Rng {
 public:
  explicit Rng(uint64_t seed = 0) {
    uint64_t sm = seed;
    for (auto& w : s_) w = splitmix64(sm);
  }

  uint64_t next_u64() {
    const uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  int64_t uniform_int(int64_t n) {
    return static_cast<int64_t>(uniform() * static_cast<double>(n)) % n;
  }

  int64_t uniform_int(int64_t lo, int64_t hi_inclusive) {
    return lo + uniform_int(hi_inclusive - lo + 1);
  }

  bool bernoulli(double p) { return uniform() < p; }

  /// Standard normal via Box-Muller, no cached spare so the stream position
  /// is a pure function of call count.
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 <= 0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

 private:
  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  uint64_t s_[4];
};

/// Derives an independent stream seed from a base seed and a tag path, e.g.
/// derive_seed(seed, {kStreamAugment, step, member}).
inline uint64_t derive_seed(uint64_t base, std::initializer_list<uint64_t> path) {
  uint64_t h = base ^ 0x2545f4914f6cdd1dULL;
  for (uint64_t p : path) {
    h ^= p + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    uint64_t s = h;
    h = splitmix64(s);
  }
  return h;
}

inline uint64_t hash_str(const char* s) {
  uint64_t h = 1469598103934665603ULL;
  for (; *s; ++s) h = (h ^ static_cast<uint64_t>(*s)) * 1099511628211ULL;
  return h;
}

// Stream tags. Keeping them in one place avoids accidental collisions.
enum StreamTag : uint64_t {
  kStreamParamInit = 1,
  kStreamSong = 2,
  kStreamExcerpt = 3,
  kStreamPitchShift = 4,
  kStreamRandomMix = 5,
  kStreamDropout = 6,
  kStreamBatchDraw = 7,
  kStreamStem = 8,
};

}  // namespace amt
