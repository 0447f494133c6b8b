#pragma once

#include <optional>
#include <vector>

#include "hlob/types.hpp"

namespace hlob::metrics {

/// 252 trading days x 6.5 hours x 3600 seconds.
inline constexpr double kTradingSecondsPerYear = 252.0 * 6.5 * 3600.0;

struct Execution {
  double price = 0.0;
  double size = 0.0;
};

/// Target-arrival slippage in bps: positive is a cost. nullopt without fills.
std::optional<double> slippage_target_arrival(const std::vector<Execution>& fills, double arrival_mid, Direction side);

/// 100 q / v in percent; nullopt when v <= 0.
std::optional<double> participation_rate(double q, double v);

/// mean / std of the increments times sqrt(annualization / dt). nullopt when
/// fewer than two increments or zero dispersion.
std::optional<double> sharpe_ratio(const std::vector<double>& increments, double dt,
                                   double annualization = kTradingSecondsPerYear);

struct ImpactPoint {
  double quantity = 0.0;
  double impact = 0.0;
};

struct PowerFit {
  bool ok = false;
  double exponent = 0.0;
  double coefficient = 0.0;
  double r2 = 0.0;
  std::size_t points_used = 0;
};

/// Least squares of log(impact) on log(quantity) over positive points. Fails
/// with fewer than 10 points or when more than half are non-positive.
PowerFit fit_impact_exponent(const std::vector<ImpactPoint>& curve);

/// Averages many per-episode curves into `bins` equal-width bins of executed
/// quantity over (0, total]; each bin reports its mean quantity and mean impact.
/// Empty bins are omitted.
std::vector<ImpactPoint> bin_impact_curve(const std::vector<std::vector<ImpactPoint>>& episodes, double total,
                                          int bins = 10);

struct DecayPoint {
  double z = 0.0;
  double impact = 0.0;
};

/// z^{1-beta} - (z-1)^{1-beta}.
double propagator_decay(double z, double beta);

struct DecayFit {
  bool ok = false;
  double beta = 0.0;
  double rmse = 0.0;
};

/// Fits beta in (0,1) to a path already normalized by its impact at z = 1.
/// Grid search then golden-section refinement.
DecayFit fit_decay_beta(const std::vector<DecayPoint>& path);

/// Averages raw post-execution paths sampled on a common z grid and divides by
/// the mean impact at z = 1. Points with z <= 1 are dropped from the output.
/// nullopt if the mean peak is not positive.
std::optional<std::vector<DecayPoint>> normalize_decay(const std::vector<std::vector<DecayPoint>>& episodes);

}  // namespace hlob::metrics
