#pragma once

// Deterministic RNG. mt19937_64 supplies the stream; bounded draws use a
// Lemire-style reduction instead of std::uniform_int_distribution so the same
// seed yields the same mutations on every standard library. Pinned campaign
// seeds in the acceptance suite rely on this.

#include <cstdint>
#include <random>
#include <vector>

namespace papora {

class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  uint64_t next_u64() { return eng_(); }

  // Uniform in [0, n). n == 0 is a caller bug; returns 0.
  uint64_t below(uint64_t n) {
    if (n == 0) return 0;
    unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * n;
    return static_cast<uint64_t>(m >> 64);
  }

  // Uniform in [lo, hi] inclusive.
  uint64_t range(uint64_t lo, uint64_t hi) { return lo + below(hi - lo + 1); }

  bool coin() { return next_u64() & 1; }

  uint8_t byte() { return uint8_t(next_u64()); }

  // Weighted pick over non-negative weights; total must be positive.
  size_t weighted(const std::vector<uint32_t>& weights) {
    uint64_t total = 0;
    for (uint32_t w : weights) total += w;
    uint64_t r = below(total);
    for (size_t i = 0; i < weights.size(); i++) {
      if (r < weights[i]) return i;
      r -= weights[i];
    }
    return weights.size() - 1;
  }

 private:
  std::mt19937_64 eng_;
};

}  // namespace papora
