#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace lcam {

// Platform-independent draws on top of std::mt19937_64. The standard
// distributions are implementation-defined, which would break bit-exact
// reproducibility across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform in [0, n), rejection-sampled to avoid modulo bias.
  std::uint64_t below(std::uint64_t n);
  double normal();

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[static_cast<std::size_t>(below(i))]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

// Mixes several words into one seed (splitmix64 finalizer).
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c = 0);

}  // namespace lcam
