#include "hlob/stat_tests.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <boost/math/distributions/students_t.hpp>

namespace hlob::stats {

namespace {

/// Midranks (1-based) of `v`; also returns sum over tie groups of (t^3 - t).
std::vector<double> midranks(const std::vector<double>& v, double& tie_term) {
  const std::size_t n = v.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(n);
  tie_term = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = rank;
    const double t = static_cast<double>(j - i + 1);
    tie_term += t * t * t - t;
    i = j + 1;
  }
  return r;
}

}  // namespace

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

Summary summarize(const std::vector<double>& x) {
  Summary s;
  s.n = x.size();
  if (x.empty()) return s;
  s.mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
  if (x.size() < 2) return s;
  double ss = 0.0;
  for (const double v : x) ss += (v - s.mean) * (v - s.mean);
  s.stddev = std::sqrt(ss / static_cast<double>(x.size() - 1));
  const boost::math::students_t t(static_cast<double>(x.size() - 1));
  s.ci95 = boost::math::quantile(t, 0.975) * s.stddev / std::sqrt(static_cast<double>(x.size()));
  return s;
}

double median(std::vector<double> x) {
  if (x.empty()) return 0.0;
  std::sort(x.begin(), x.end());
  const std::size_t n = x.size();
  return n % 2 ? x[n / 2] : 0.5 * (x[n / 2 - 1] + x[n / 2]);
}

TestResult mann_whitney_greater(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.empty() || y.empty()) throw std::invalid_argument("mann-whitney: both samples must be non-empty");
  std::vector<double> all(x);
  all.insert(all.end(), y.begin(), y.end());
  double ties = 0.0;
  const auto r = midranks(all, ties);
  const double n1 = static_cast<double>(x.size());
  const double n2 = static_cast<double>(y.size());
  double r1 = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) r1 += r[i];
  const double u = r1 - n1 * (n1 + 1.0) / 2.0;
  const double mu = n1 * n2 / 2.0;
  const double n = n1 + n2;
  const double var = n1 * n2 / 12.0 * ((n + 1.0) - ties / (n * (n - 1.0)));
  TestResult t;
  t.statistic = u;
  if (!(var > 0.0)) return t;
  t.z = (u - mu - 0.5) / std::sqrt(var);
  t.p_value = 1.0 - normal_cdf(t.z);
  return t;
}

TestResult wilcoxon_greater(const std::vector<double>& differences) {
  std::vector<double> d;
  for (const double v : differences) {
    if (v != 0.0) d.push_back(v);
  }
  TestResult t;
  if (d.empty()) return t;
  std::vector<double> mag(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) mag[i] = std::abs(d[i]);
  double ties = 0.0;
  const auto r = midranks(mag, ties);
  double w = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d[i] > 0.0) w += r[i];
  }
  t.statistic = w;
  const auto n = d.size();
  const double nd = static_cast<double>(n);
  const double mu = nd * (nd + 1.0) / 4.0;
  const double var = nd * (nd + 1.0) * (2.0 * nd + 1.0) / 24.0 - ties / 48.0;
  if (var > 0.0) t.z = (w - mu - 0.5) / std::sqrt(var);
  if (ties == 0.0 && n <= 30) {
    // Exact: count subsets of {1..n} with rank sum >= w.
    const std::size_t max_sum = n * (n + 1) / 2;
    std::vector<double> ways(max_sum + 1, 0.0);
    ways[0] = 1.0;
    for (std::size_t k = 1; k <= n; ++k) {
      for (std::size_t s = max_sum; s >= k; --s) ways[s] += ways[s - k];
    }
    const auto w_int = static_cast<std::size_t>(std::llround(w));
    double tail = 0.0;
    for (std::size_t s = w_int; s <= max_sum; ++s) tail += ways[s];
    t.p_value = tail / std::pow(2.0, nd);
    return t;
  }
  t.p_value = var > 0.0 ? 1.0 - normal_cdf(t.z) : 1.0;
  return t;
}

double kolmogorov_survival(double t) {
  if (t <= 0.0) return 1.0;
  if (t < 0.2) return 1.0;
  double s = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * t * t);
    s += (k % 2 ? 1.0 : -1.0) * term;
    if (term < 1e-16) break;
  }
  return std::clamp(2.0 * s, 0.0, 1.0);
}

TestResult ks_exponential(std::vector<double> x, double rate) {
  if (x.empty() || !(rate > 0.0)) throw std::invalid_argument("ks: need samples and a positive rate");
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = x[i] <= 0.0 ? 0.0 : -std::expm1(-rate * x[i]);
    d = std::max({d, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
  }
  TestResult t;
  t.statistic = d;
  const double sn = std::sqrt(n);
  t.z = (sn + 0.12 + 0.11 / sn) * d;
  t.p_value = kolmogorov_survival(t.z);
  return t;
}

}  // namespace hlob::stats
