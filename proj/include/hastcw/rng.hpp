#pragma once

#include <cstdint>
#include <vector>

namespace hastcw {

// Counter-based splitmix64 generator. Uses only integer arithmetic and
// IEEE add/mul, so a given seed yields the same stream on every platform.
class SeededRng {
public:
  explicit SeededRng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n), n >= 1. Rejection keeps it unbiased.
  uint64_t uniform_int(uint64_t n) {
    uint64_t limit = ~uint64_t{0} - (~uint64_t{0} % n);
    uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % n;
  }

  // Approximate standard normal via a 12-term Irwin-Hall sum. Platform-exact
  // (additions only); tails are clipped at +-6 sigma, which is immaterial for
  // init noise and image jitter.
  double normal() {
    double s = 0.0;
    for (int i = 0; i < 12; ++i) s += uniform();
    return s - 6.0;
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    if (v.size() < 2) return;
    for (size_t i = v.size() - 1; i > 0; --i) {
      size_t j = static_cast<size_t>(uniform_int(i + 1));
      std::swap(v[i], v[j]);
    }
  }

  // Independent child stream; pure function of (seed, id).
  SeededRng derive(uint64_t id) const {
    return SeededRng(mix(state_ ^ 0xA0761D6478BD642FULL) ^ mix(id * 0x9E3779B97F4A7C15ULL + 0xE7037ED1A0B428DBULL));
  }

private:
  static uint64_t mix(uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  uint64_t state_;
};

}  // namespace hastcw
