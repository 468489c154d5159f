#pragma once
// Counter-based deterministic RNG. Every consumer takes its own stream via
// split(), so parallel shards reproduce bit-identically regardless of
// scheduling. Normal variates use Box-Muller on our own uniforms; nothing
// here depends on libc distribution internals.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

namespace evnet {

inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : key_(mix64(seed ^ 0x2545f4914f6cdd1dULL)) {}

  // Independent child stream; deterministic in (parent key, stream id).
  Rng split(std::uint64_t stream) const {
    Rng child(0);
    child.key_ = mix64(key_ ^ mix64(stream + 0x632be59bd9b4e019ULL));
    child.counter_ = 0;
    return child;
  }

  std::uint64_t next_u64() { return mix64(key_ + 0x9e3779b97f4a7c15ULL * ++counter_); }

  // Uniform on (0,1); never returns 0, safe under log().
  double uniform01() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double normal() {
    double u1 = uniform01();
    double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  // Unbiased integer in [0, n).
  std::uint64_t bounded(std::uint64_t n) {
    const std::uint64_t threshold = -n % n;
    for (;;) {
      std::uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(bounded(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

}  // namespace evnet
