#include "hlob/rng.hpp"

#include <cmath>

#include "hlob/types.hpp"

namespace hlob {

double Rng::exponential(double rate) {
  if (!(rate > 0.0)) throw ContractViolation("exponential rate must be positive");
  return -std::log(uniform_open0()) / rate;
}

int Rng::geometric(double mean) {
  if (!(mean >= 1.0)) throw ContractViolation("geometric mean must be >= 1");
  if (mean == 1.0) return 1;
  const double p = 1.0 / mean;
  // Inversion: P(X > k) = (1-p)^k.
  const double k = std::floor(std::log(uniform_open0()) / std::log1p(-p));
  return 1 + static_cast<int>(k);
}

double Rng::normal(double mu, double sigma) {
  if (has_spare_) {
    has_spare_ = false;
    return mu + sigma * spare_;
  }
  // Marsaglia polar method.
  double u = 0.0;
  double v = 0.0;
  double s = 0.0;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double m = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * m;
  has_spare_ = true;
  return mu + sigma * u * m;
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace hlob
