#pragma once

// splitmix64 generator with named substreams. Every random draw in the
// library goes through this type so results are identical across platforms
// and standard-library implementations.

#include <cstdint>
#include <span>
#include <string_view>

namespace survival {

class Rng {
 public:
  explicit Rng(std::uint64_t state) : state_(state) {}

  /// Independent stream keyed by (seed, purpose, index); changing one key
  /// never shifts the draws of another stream.
  static Rng substream(std::uint64_t seed, std::string_view purpose, std::uint64_t index = 0);

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 bits of resolution.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  /// Index drawn from a probability vector by inverse CDF.
  std::size_t categorical(std::span<const double> probs);

 private:
  std::uint64_t state_;
};

}  // namespace survival
