#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

namespace wsca {

// Deterministic, platform-independent generators. Trace synthesis derives one
// stream per (seed, purpose, index) so results never depend on generation order.

inline uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

enum class Stream : uint64_t {
  Weights = 1,
  GroupInputs = 2,
  Noise = 3,
  Jitter = 4,
  Shuffle = 5,
  MeanEstimate = 6,
  RandomWeight = 7,
  FixedInputs = 8,
};

inline uint64_t derive_stream(uint64_t seed, Stream domain, uint64_t index = 0) {
  uint64_t s = seed;
  uint64_t a = splitmix64(s);
  s ^= uint64_t(domain) * 0xD1B54A32D192ED03ull;
  uint64_t b = splitmix64(s);
  s ^= index * 0x8EBC6AF09C88C6E3ull;
  uint64_t c = splitmix64(s);
  return a ^ b ^ c;
}

// xoshiro256++ seeded through splitmix64.
class Rng {
public:
  explicit Rng(uint64_t seed) {
    uint64_t sm = seed;
    for (auto& w : s_) w = splitmix64(sm);
  }

  uint64_t next() {
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

  // [0, 1)
  double uniform() { return double(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // [0, n)
  uint64_t below(uint64_t n) {
    return uint64_t((unsigned __int128)next() * n >> 64);
  }

  // [lo, hi] inclusive
  int64_t range(int64_t lo, int64_t hi) {
    return lo + int64_t(below(uint64_t(hi - lo + 1)));
  }

  double gaussian(double sigma = 1.0) {
    if (has_spare_) {
      has_spare_ = false;
      return spare_ * sigma;
    }
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta) * sigma;
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = size_t(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

private:
  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  std::array<uint64_t, 4> s_{};
  double spare_ = 0.0;
  bool has_spare_ = false;
};

inline Rng stream_rng(uint64_t seed, Stream domain, uint64_t index = 0) {
  return Rng(derive_stream(seed, domain, index));
}

} // namespace wsca
