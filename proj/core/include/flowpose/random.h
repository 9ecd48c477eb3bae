#ifndef FLOWPOSE_RANDOM_H_
#define FLOWPOSE_RANDOM_H_

#include <cstdint>
#include <limits>
#include <string_view>
#include <vector>

namespace flowpose {

// Counter-based generator: output k is a SplitMix64 finalizer applied to
// key + k * golden-gamma, where the key is derived from (seed, purpose,
// stream). Streams with different purposes are independent, and every draw
// is reproducible bit-exactly on any platform. All distribution helpers are
// implemented here rather than with <random> distributions, whose output is
// implementation-defined.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  CounterRng(std::uint64_t seed, std::string_view purpose,
             std::uint64_t stream = 0);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }
  result_type operator()() { return next(); }

  std::uint64_t next();
  // Uniform double in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, n); n must be > 0. Unbiased (rejection).
  std::uint64_t uniform_index(std::uint64_t n);
  // Standard normal via Box-Muller.
  double gaussian();

  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x);

// Draws min(k, n) distinct indices from [0, n) by a partial Fisher-Yates
// shuffle; order of the result is the draw order.
std::vector<std::size_t> sample_without_replacement(std::size_t n,
                                                    std::size_t k,
                                                    CounterRng& rng);

}  // namespace flowpose

#endif  // FLOWPOSE_RANDOM_H_
