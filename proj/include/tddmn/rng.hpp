#pragma once

#include <cstdint>
#include <utility>
#include <vector>

namespace tddmn {

// Deterministic PRNG (splitmix64). Same seed + same call sequence gives the
// same stream on every platform; std::* distributions are deliberately
// avoided because their output is implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Unbiased integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = ~0ULL - ~0ULL % n;
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % n;
  }

  bool bernoulli(double p) { return uniform() < p; }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

 private:
  std::uint64_t state_;
};

// Hash-combines a seed with stream labels so independent consumers (folds,
// epochs, hop settings) get decorrelated, reproducible streams.
inline std::uint64_t mix_seed(std::uint64_t seed) { return Rng(seed).next_u64(); }

template <class... Rest>
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t head, Rest... rest) {
  Rng r(seed ^ (head + 0x9e3779b97f4a7c15ULL));
  return mix_seed(r.next_u64(), rest...);
}

}  // namespace tddmn
