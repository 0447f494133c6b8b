#include <doctest.h>

#include <cmath>
#include <vector>

#include "hlob/rng.hpp"
#include "hlob/stat_tests.hpp"

using namespace hlob;
using namespace hlob::stats;

TEST_CASE("summary statistics") {
  const auto s = summarize({1.0, 2.0, 3.0, 4.0});
  CHECK(s.n == 4);
  CHECK(s.mean == doctest::Approx(2.5));
  CHECK(s.stddev == doctest::Approx(std::sqrt(5.0 / 3.0)));
  // t(0.975, 3) = 3.182446305284263
  CHECK(s.ci95 == doctest::Approx(3.182446305284263 * std::sqrt(5.0 / 3.0) / 2.0).epsilon(1e-9));
  CHECK(median({5.0, 1.0, 3.0}) == 3.0);
  CHECK(median({4.0, 1.0, 3.0, 2.0}) == 2.5);
}

TEST_CASE("normal cdf") {
  CHECK(normal_cdf(0.0) == doctest::Approx(0.5));
  CHECK(normal_cdf(1.959963984540054) == doctest::Approx(0.975).epsilon(1e-9));
}

TEST_CASE("Mann-Whitney one-sided test") {
  // Complete separation with 5 and 5: U = 25, exact p = 1 / C(10, 5) = 0.00397.
  const auto r = mann_whitney_greater({6, 7, 8, 9, 10}, {1, 2, 3, 4, 5});
  CHECK(r.statistic == doctest::Approx(25.0));
  CHECK(r.p_value < 0.01);
  const auto rev = mann_whitney_greater({1, 2, 3, 4, 5}, {6, 7, 8, 9, 10});
  CHECK(rev.p_value > 0.99);
  // Identical samples: no evidence.
  const auto same = mann_whitney_greater({1, 2, 3}, {1, 2, 3});
  CHECK(same.p_value > 0.4);
}

TEST_CASE("Mann-Whitney normal approximation against a reference value") {
  // x = 6..25 against y = 1..20: 280 strict wins plus 15 ties at one half, U = 287.5.
  // scipy.stats.mannwhitneyu(asymptotic, greater) gives p = 0.009260973137871125.
  std::vector<double> x;
  std::vector<double> y;
  for (int k = 1; k <= 20; ++k) {
    x.push_back(k + 5);
    y.push_back(k);
  }
  const auto r = mann_whitney_greater(x, y);
  CHECK(r.statistic == doctest::Approx(287.5));
  const double n = 20.0;
  const double mu = n * n / 2.0;
  // 15 tied pairs of size 2 across 40 values.
  const double ties = 15.0 * (8.0 - 2.0);
  const double sigma = std::sqrt(n * n / 12.0 * ((2 * n + 1) - ties / (2 * n * (2 * n - 1))));
  const double z = (287.5 - mu - 0.5) / sigma;
  CHECK(r.z == doctest::Approx(z).epsilon(1e-9));
  CHECK(r.p_value == doctest::Approx(1.0 - normal_cdf(z)).epsilon(1e-9));
  CHECK(r.p_value == doctest::Approx(0.009260973137871125).epsilon(1e-9));
}

TEST_CASE("Wilcoxon signed-rank exact small sample") {
  // All five differences positive: W+ = 15, exact p = 1 / 2^5.
  const auto r = wilcoxon_greater({0.5, 1.0, 1.5, 2.0, 2.5});
  CHECK(r.statistic == doctest::Approx(15.0));
  CHECK(r.p_value == doctest::Approx(1.0 / 32.0).epsilon(1e-12));
  // Ranks 1..4 with the smallest negative: W+ = 9, P(W+ >= 9) = 2 / 16.
  const auto s = wilcoxon_greater({-0.1, 0.2, 0.3, 0.4});
  CHECK(s.statistic == doctest::Approx(9.0));
  CHECK(s.p_value == doctest::Approx(2.0 / 16.0).epsilon(1e-12));
  // Zeros are dropped.
  const auto z = wilcoxon_greater({0.0, 0.0, 0.5, 1.0, 1.5, 2.0, 2.5});
  CHECK(z.p_value == doctest::Approx(1.0 / 32.0).epsilon(1e-12));
}

TEST_CASE("Wilcoxon large sample is calibrated under the null") {
  Rng rng(9);
  int rejections = 0;
  const int trials = 400;
  for (int t = 0; t < trials; ++t) {
    std::vector<double> d;
    for (int k = 0; k < 40; ++k) d.push_back(rng.normal(0.0, 1.0));
    if (wilcoxon_greater(d).p_value < 0.05) ++rejections;
  }
  // Binomial(400, 0.05): mean 20, sd 4.4.
  CHECK(rejections > 5);
  CHECK(rejections < 36);
}

TEST_CASE("Kolmogorov distribution tail") {
  // Reference values of the limiting distribution.
  CHECK(kolmogorov_survival(1.358) == doctest::Approx(0.05).epsilon(2e-3));
  CHECK(kolmogorov_survival(1.628) == doctest::Approx(0.01).epsilon(5e-3));
  CHECK(kolmogorov_survival(0.0) == doctest::Approx(1.0));
}

TEST_CASE("KS test accepts exponential samples and rejects the wrong rate") {
  Rng rng(4);
  std::vector<double> x;
  for (int k = 0; k < 10000; ++k) x.push_back(rng.exponential(2.0));
  CHECK(ks_exponential(x, 2.0).p_value > 0.01);
  CHECK(ks_exponential(x, 2.2).p_value < 0.01);
  std::vector<double> uniform;
  for (int k = 0; k < 2000; ++k) uniform.push_back(rng.uniform());
  CHECK(ks_exponential(uniform, 2.0).p_value < 0.01);
}
