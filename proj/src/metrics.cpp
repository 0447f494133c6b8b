#include "hlob/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace hlob::metrics {

std::optional<double> slippage_target_arrival(const std::vector<Execution>& fills, double arrival_mid, Direction side) {
  if (!(arrival_mid > 0.0)) throw ContractViolation("slippage: arrival price must be positive");
  double notional = 0.0;
  double volume = 0.0;
  for (const auto& f : fills) {
    notional += f.price * f.size;
    volume += f.size;
  }
  if (!(volume > 0.0)) return std::nullopt;
  const double vwap = notional / volume;
  const double rel = (vwap - arrival_mid) / arrival_mid * 1e4;
  return side == Direction::buy ? rel : -rel;
}

std::optional<double> participation_rate(double q, double v) {
  if (!(v > 0.0)) return std::nullopt;
  return 100.0 * q / v;
}

std::optional<double> sharpe_ratio(const std::vector<double>& x, double dt, double annualization) {
  if (x.size() < 2 || !(dt > 0.0)) return std::nullopt;
  double mean = 0.0;
  for (const double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  double ss = 0.0;
  for (const double v : x) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(x.size() - 1));
  if (!(sd > 1e-12 * std::max(1.0, std::abs(mean)))) return std::nullopt;
  return mean / sd * std::sqrt(annualization / dt);
}

PowerFit fit_impact_exponent(const std::vector<ImpactPoint>& curve) {
  PowerFit fit;
  if (curve.size() < 10) return fit;
  std::vector<double> lx, ly;
  for (const auto& p : curve) {
    if (p.quantity > 0.0 && p.impact > 0.0) {
      lx.push_back(std::log(p.quantity));
      ly.push_back(std::log(p.impact));
    }
  }
  if (2 * lx.size() < curve.size() || lx.size() < 2) return fit;
  const double n = static_cast<double>(lx.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
    syy += (ly[i] - my) * (ly[i] - my);
  }
  if (!(sxx > 0.0)) return fit;
  fit.exponent = sxy / sxx;
  fit.coefficient = std::exp(my - fit.exponent * mx);
  double sse = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    const double r = ly[i] - (my + fit.exponent * (lx[i] - mx));
    sse += r * r;
  }
  fit.r2 = syy > 0.0 ? 1.0 - sse / syy : 1.0;
  fit.points_used = lx.size();
  fit.ok = true;
  return fit;
}

std::vector<ImpactPoint> bin_impact_curve(const std::vector<std::vector<ImpactPoint>>& episodes, double total,
                                          int bins) {
  if (!(total > 0.0) || bins < 1) throw ContractViolation("impact binning: total and bins must be positive");
  std::vector<double> sq(bins, 0.0), si(bins, 0.0), n(bins, 0.0);
  for (const auto& ep : episodes) {
    for (const auto& p : ep) {
      if (!(p.quantity > 0.0)) continue;
      int b = static_cast<int>(std::ceil(p.quantity / total * bins)) - 1;
      b = std::clamp(b, 0, bins - 1);
      sq[b] += p.quantity;
      si[b] += p.impact;
      n[b] += 1.0;
    }
  }
  std::vector<ImpactPoint> out;
  for (int b = 0; b < bins; ++b) {
    if (n[b] > 0.0) out.push_back({sq[b] / n[b], si[b] / n[b]});
  }
  return out;
}

double propagator_decay(double z, double beta) {
  if (z < 1.0) throw ContractViolation("decay: z must be >= 1");
  return std::pow(z, 1.0 - beta) - std::pow(z - 1.0, 1.0 - beta);
}

namespace {

double decay_sse(const std::vector<DecayPoint>& path, double beta) {
  double s = 0.0;
  for (const auto& p : path) {
    const double r = p.impact - propagator_decay(p.z, beta);
    s += r * r;
  }
  return s;
}

}  // namespace

DecayFit fit_decay_beta(const std::vector<DecayPoint>& path) {
  DecayFit fit;
  std::vector<DecayPoint> pts;
  for (const auto& p : path) {
    if (p.z > 1.0 && std::isfinite(p.impact)) pts.push_back(p);
  }
  if (pts.size() < 10) return fit;
  constexpr int kGrid = 1000;
  double best_beta = 0.0;
  double best = std::numeric_limits<double>::infinity();
  for (int i = 1; i < kGrid; ++i) {
    const double b = static_cast<double>(i) / kGrid;
    const double s = decay_sse(pts, b);
    if (s < best) {
      best = s;
      best_beta = b;
    }
  }
  // Golden-section refinement inside the bracketing grid cell pair.
  double lo = std::max(1e-9, best_beta - 1.0 / kGrid);
  double hi = std::min(1.0 - 1e-9, best_beta + 1.0 / kGrid);
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = hi - g * (hi - lo);
  double d = lo + g * (hi - lo);
  double fc = decay_sse(pts, c);
  double fd = decay_sse(pts, d);
  for (int it = 0; it < 100 && hi - lo > 1e-10; ++it) {
    if (fc < fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - g * (hi - lo);
      fc = decay_sse(pts, c);
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + g * (hi - lo);
      fd = decay_sse(pts, d);
    }
  }
  const double refined = 0.5 * (lo + hi);
  const double refined_sse = decay_sse(pts, refined);
  fit.beta = refined_sse <= best ? refined : best_beta;
  fit.rmse = std::sqrt(std::min(refined_sse, best) / static_cast<double>(pts.size()));
  fit.ok = std::isfinite(fit.rmse);
  return fit;
}

std::optional<std::vector<DecayPoint>> normalize_decay(const std::vector<std::vector<DecayPoint>>& episodes) {
  std::map<long long, std::pair<double, double>> sum;  // z key -> (sum impact, count)
  std::map<long long, double> zs;
  for (const auto& ep : episodes) {
    for (const auto& p : ep) {
      const auto key = static_cast<long long>(std::llround(p.z * 1e6));
      auto& s = sum[key];
      s.first += p.impact;
      s.second += 1.0;
      zs[key] = p.z;
    }
  }
  const auto peak = sum.find(1000000);
  if (peak == sum.end()) return std::nullopt;
  const double norm = peak->second.first / peak->second.second;
  if (!(norm > 0.0)) return std::nullopt;
  std::vector<DecayPoint> out;
  for (const auto& [key, s] : sum) {
    if (key <= 1000000) continue;
    out.push_back({zs[key], s.first / s.second / norm});
  }
  return out;
}

}  // namespace hlob::metrics
