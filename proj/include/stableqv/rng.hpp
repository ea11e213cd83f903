#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace sqv {

/// SplitMix64 finalizer. Used to turn (master seed, index) into
/// well-separated stream seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seed of replication `index` under `master`. Injective in `index` for a
/// fixed master because splitmix64 is a bijection on 64-bit words.
constexpr std::uint64_t derive_seed(std::uint64_t master,
                                    std::uint64_t index) noexcept {
  return splitmix64(splitmix64(master) ^ splitmix64(index ^ 0xD1B54A32D192ED03ULL));
}

// Random stream owned by the caller. Not thread-safe; give each worker its
// own stream seeded via derive_seed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_u64() { return engine_(); }

  // [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // (0, 1]
  double uniform_pos() { return 1.0 - uniform(); }

  double exponential() { return -std::log(uniform_pos()); }

  double normal() { return normal_(engine_); }

  std::uint64_t poisson(double mean) {
    std::poisson_distribution<std::uint64_t> dist(mean);
    return dist(engine_);
  }

  // Uniform integer in [0, n).
  std::size_t index(std::size_t n) {
    return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace sqv
