#pragma once

#include <cstdint>
#include <random>

namespace hlob {

/// Seeded generator used everywhere in the simulator.
///
/// The engine is std::mt19937_64, but variates are derived here rather than
/// through <random> distributions, whose algorithms are implementation-defined.
/// That keeps event streams bit-identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform on (0, 1].
  double uniform_open0() { return 1.0 - uniform(); }

  double exponential(double rate);

  /// Geometric on {1, 2, ...} with the given mean (mean >= 1).
  int geometric(double mean);

  double normal(double mu, double sigma);

  /// Index drawn proportionally to non-negative weights; weights must not all be zero.
  template <typename Range>
  std::size_t categorical(const Range& weights, double total) {
    const double u = uniform() * total;
    double acc = 0.0;
    std::size_t last_positive = 0;
    std::size_t i = 0;
    for (const double w : weights) {
      if (w > 0.0) {
        acc += w;
        last_positive = i;
        if (u < acc) return i;
      }
      ++i;
    }
    return last_positive;
  }

  std::uint64_t next_u64() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// splitmix64 mix; derives independent stream seeds from (base, stream).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

}  // namespace hlob
