#pragma once

#include <array>
#include <filesystem>
#include <limits>
#include <optional>
#include <vector>

#include <json.hpp>

#include "hlob/rng.hpp"
#include "hlob/types.hpp"

namespace hlob::hawkes {

using Vector12 = std::array<double, kNumEventKinds>;
using Matrix12 = std::array<Vector12, kNumEventKinds>;

/// Parameters of the 12-type compound Hawkes process with exponential kernels.
///
/// Row i of `excitation`/`decay` describes how events of every type j feed the
/// intensity of type i: lambda_i(t) = scale * mu_i + sum_j alpha_ij * sum_k exp(-kappa_ij (t - t_k^j)).
struct HawkesParams {
  Vector12 baseline{};
  Matrix12 excitation{};
  Matrix12 decay{};
  Vector12 size_mean{};
  double volume_scale = 1.0;

  /// Throws ConfigError if any invariant (non-negativity, kappa > 0, sizes,
  /// stationarity) is broken.
  void validate() const;

  static HawkesParams from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  static HawkesParams load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  /// Homogeneous Poisson flow: alpha = 0, unit kappa, given rates and size means.
  static HawkesParams poisson(const Vector12& rates, const Vector12& size_means);
};

struct Stationarity {
  bool stationary = false;
  double spectral_radius = 0.0;
};

/// Spectral radius of [alpha_ij / kappa_ij]; validates shape and signs.
Stationarity stationarity_check(const std::vector<std::vector<double>>& alpha,
                                const std::vector<std::vector<double>>& kappa);
Stationarity stationarity_check(const HawkesParams& params);

/// Long-run per-type event rates (I - A/K)^{-1} (scale * mu). Requires stationarity.
Vector12 stationary_rates(const HawkesParams& params);

/// Recursive exponential-kernel state: accum[i][j] = sum_k exp(-kappa_ij (last_time - t_k^j)).
struct EventHistory {
  Matrix12 accum{};
  double last_time = 0.0;
  std::uint64_t event_count = 0;

  /// Adds an event of type `kind` at time t >= last_time.
  void register_event(const HawkesParams& params, EventKind kind, double t);
};

Vector12 intensity_at(const HawkesParams& params, const EventHistory& history, double t);

struct MarketEvent {
  double time = 0.0;
  EventKind kind = EventKind::lo_top_bid;
  int size = 1;
};

struct Candidate {
  double time = 0.0;
  EventKind kind = EventKind::lo_top_bid;
};

/// Ogata thinning from t_now without touching the history. Returns nullopt when
/// no event occurs before t_limit (or the total intensity is zero).
std::optional<Candidate> propose_next_event(const HawkesParams& params, const EventHistory& history,
                                            double t_now, Rng& rng,
                                            double t_limit = std::numeric_limits<double>::infinity());

/// Draws the next event after t_now, samples its size and registers it in `history`.
MarketEvent simulate_next_event(const HawkesParams& params, EventHistory& history, double t_now,
                                Rng& rng);

/// Compound mark: geometric size on {1, 2, ...} with the configured mean.
int sample_order_size(const HawkesParams& params, EventKind kind, Rng& rng);

}  // namespace hlob::hawkes
