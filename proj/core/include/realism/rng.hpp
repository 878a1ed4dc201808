#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>

namespace realism {

// Counter-based generator: draw n is splitmix64(key + n * golden). The output
// sequence depends only on (seed, stream), so independent streams can be handed
// to parallel workers and results stay bit-identical across platforms and
// thread counts. Normal draws use Box-Muller so no library distribution (whose
// algorithm is implementation-defined) is involved.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t next_u64();
  // Uniform in [0, 1) with 53 bits of precision.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal(double mean = 0.0, double stddev = 1.0);
  // Uniform in [0, n). n must be positive.
  std::size_t index(std::size_t n);

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[index(i)]);
    }
  }

  std::uint64_t counter() const { return counter_; }

  static std::uint64_t mix(std::uint64_t x);

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace realism
