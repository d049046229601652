#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>

namespace mosaic {

// PCG32 with explicit distribution code so streams are identical across
// platforms and toolchains (std:: distributions are implementation-defined).
class Rng {
 public:
  Rng() : Rng(0x853c49e6748fea9bULL) {}
  explicit Rng(uint64_t seed, uint64_t stream = 0xda3e39cb94b95bdbULL) {
    state_ = 0;
    inc_ = (stream << 1u) | 1u;
    next_u32();
    state_ += seed;
    next_u32();
  }

  uint32_t next_u32() {
    uint64_t old = state_;
    state_ = old * 6364136223846793005ULL + inc_;
    uint32_t xorshifted = static_cast<uint32_t>(((old >> 18u) ^ old) >> 27u);
    uint32_t rot = static_cast<uint32_t>(old >> 59u);
    return (xorshifted >> rot) | (xorshifted << ((32u - rot) & 31u));
  }

  uint64_t next_u64() {
    return (static_cast<uint64_t>(next_u32()) << 32) | next_u32();
  }

  // uniform in [0, 1)
  double uniform() { return next_u32() * (1.0 / 4294967296.0); }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // uniform integer in [0, n), unbiased via rejection
  uint32_t uniform_int(uint32_t n) {
    if (n <= 1) return 0;
    uint32_t threshold = (-n) % n;
    for (;;) {
      uint32_t r = next_u32();
      if (r >= threshold) return r % n;
    }
  }

  int uniform_int(int lo, int hi_inclusive) {
    return lo + static_cast<int>(uniform_int(static_cast<uint32_t>(hi_inclusive - lo + 1)));
  }

  // Box-Muller; one value per call keeps the stream layout simple.
  double normal() {
    double u1 = 0.0;
    do { u1 = uniform(); } while (u1 <= 1e-12);
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Derive an independent child stream; order-insensitive keyed splitting.
  Rng split(uint64_t key) const {
    uint64_t s = mix(state_ ^ mix(key + 0x9e3779b97f4a7c15ULL));
    uint64_t t = mix(inc_ ^ mix(key + 0x7f4a7c159e3779b9ULL));
    return Rng(s, t | 1u);
  }

  static uint64_t mix(uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  static uint64_t hash_combine(std::initializer_list<uint64_t> keys) {
    uint64_t h = 0x2b992ddfa23249d6ULL;
    for (uint64_t k : keys) h = mix(h ^ mix(k));
    return h;
  }

 private:
  uint64_t state_;
  uint64_t inc_;
};

}  // namespace mosaic
