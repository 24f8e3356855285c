#pragma once

#include <cstdint>
#include <cstddef>
#include <random>
#include <utility>

namespace roadrank {

/// SplitMix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream) {
  return mix64(mix64(root) ^ mix64(stream + 0x632be59bd9b4e019ULL));
}

/// Named stages of the pipeline; each gets its own stream off the root seed.
enum class Stage : std::uint64_t {
  kSampling = 1,
  kInit = 2,
  kSplit = 3,
  kShuffle = 4,
  kDropout = 5,
  kSynth = 6,
};

constexpr std::uint64_t stage_seed(std::uint64_t root, Stage s) {
  return derive_seed(root, static_cast<std::uint64_t>(s));
}

/// Seedable generator with platform-independent derived draws.
///
/// std::mt19937_64 output is fixed by the standard; the standard distributions
/// are not, so uniform reals and bounded integers are derived here directly.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(mix64(seed)) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). Rejection sampling removes modulo bias.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  /// Fisher-Yates shuffle using below().
  template <typename Container>
  void shuffle(Container& c) {
    for (std::size_t i = c.size(); i > 1; --i) {
      std::swap(c[i - 1], c[below(i)]);
    }
  }

  /// Independent child stream; consumes one draw from this generator.
  Rng split() { return Rng(derive_seed(engine_(), 0x5bd1e995ULL)); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace roadrank
