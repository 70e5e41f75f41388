#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace deci {

// Deterministic random stream. Every draw goes through transforms coded
// here (never through std distributions, whose output is implementation
// defined), so a seed pins the exact sequence on any platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal(double mean = 0.0, double sd = 1.0);

  // Uniform in [0, n). Rejection sampled so every value is equally likely.
  std::size_t below(std::size_t n);

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

  std::vector<std::size_t> permutation(std::size_t n);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Derives a child seed from a base seed and up to two stream tags, so
// nested components (per-fold, per-subject, per-epoch) get independent
// deterministic streams.
std::uint64_t mix_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0);

}  // namespace deci
