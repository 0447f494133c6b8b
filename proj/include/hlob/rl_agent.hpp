#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "hlob/agent_api.hpp"
#include "hlob/rl_policy.hpp"

namespace hlob::rl {

/// What the observation needs beyond the view.
struct ObservationContext {
  double reference_mid = 1000.0;  // ticks, mid at activation
  double start = 0.0;
  double end = 1.0;
  int rho = 0;
};

/// Builds the normalized feature vector. If the book is one-sided, quote
/// features come from `fallback` (last two-sided snapshot) and `stale` is set.
std::vector<double> build_observation(const MarketView& view, const ObservationContext& ctx,
                                      const std::vector<double>& scales, const QuoteState* fallback = nullptr,
                                      bool* stale = nullptr);

/// Cancels need an own order at top; placements must keep inventory plus
/// same-side resting volume within +/- cap. Skip is always feasible.
ActionMask action_mask(const MarketView& view, int inventory_cap, int order_size = 1);

struct MarketMakerConfig {
  double period = 0.213;
  int inventory_cap = 20;
  int order_size = 1;
  /// Sample from the policy; otherwise act greedily.
  bool stochastic = true;
  double intervention_cost = 1e-4;
  double fee_rate = 1e-4;
};

class MarketMakerAgent final : public Agent {
 public:
  MarketMakerAgent(const PolicyParams& params, const MarketMakerConfig& config, std::uint64_t seed);

  std::string_view kind() const override { return "rl"; }
  bool wants_event_wakes() const override { return true; }
  void on_activate(const MarketView& view) override;
  std::vector<AgentAction> on_wake(const MarketView& view) override;
  void on_fill(const FillReport& report) override;
  void on_episode_end(const MarketView& view) override;

  /// TWAP-presence signal at time t; unset means rho = 0.
  void set_rho_source(std::function<int(double)> source) { rho_source_ = std::move(source); }
  void set_end_time(double end) { end_ = end; }

  const Trajectory& trajectory() const { return trajectory_; }
  Trajectory take_trajectory() { return std::move(trajectory_); }
  /// (time of the decision, reward earned until the next decision), currency units.
  const std::vector<std::pair<double, double>>& reward_times() const { return reward_times_; }
  double episode_return() const { return trajectory_.episode_return; }
  std::uint64_t interventions() const { return interventions_; }
  std::uint64_t stale_observations() const { return stale_; }

 private:
  double mark(const MarketView& view) const;
  void close_pending(double new_mtm, double extra_fee, bool done);

  const PolicyParams& params_;
  MarketMakerConfig config_;
  Rng rng_;
  std::function<int(double)> rho_source_;
  ObservationContext ctx_;
  double end_ = 1.0;
  std::optional<QuoteState> last_two_sided_;
  Forward forward_;

  double tick_size_ = 0.01;
  int inventory_ = 0;
  double prev_mtm_ = 0.0;
  double liquidated_notional_ = 0.0;
  std::optional<Sample> pending_;
  double pending_time_ = 0.0;
  Trajectory trajectory_;
  std::vector<std::pair<double, double>> reward_times_;
  std::uint64_t interventions_ = 0;
  std::uint64_t stale_ = 0;
};

}  // namespace hlob::rl
