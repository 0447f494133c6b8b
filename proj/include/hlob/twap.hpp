#pragma once

#include <cstdint>
#include <vector>

#include <json.hpp>

#include "hlob/agent_api.hpp"

namespace hlob {

struct TwapConfig {
  Direction side = Direction::buy;
  int quantity = 300;          // Q, units
  double horizon = 300.0;      // T, seconds
  double window = 50.0;        // W, seconds
  double period = 1.0;         // f, seconds between actions
  double start_time = 0.0;     // seconds after warm-up
  double urgency_time_frac = 0.75;
  double urgency_fill_frac = 0.90;

  void validate() const;
  static TwapConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

/// Average child order size of the schedule, Q * f / T.
double expected_child_size(const TwapConfig& config);

struct TwapState {
  int executed = 0;
  int resting = 0;
  int window_index = 0;
  int window_executed = 0;
  /// Limit units active in the window: resting at window start plus placed since.
  int window_lo_units = 0;
  int window_lo_filled = 0;

  int remaining(const TwapConfig& c) const { return c.quantity - executed; }
};

/// Window of an elapsed time e in (0, T]: ceil(e / W) - 1, so a window owns its right edge.
int window_of(const TwapConfig& config, double elapsed);
double window_elapsed_fraction(const TwapConfig& config, double elapsed);
/// Scheduled actions left including the current one: round((T - e) / f) + 1.
int actions_remaining(const TwapConfig& config, double elapsed);
/// Fraction of the window's limit volume filled so far; 1 when the window had none.
double window_fill_fraction(const TwapState& state);

bool is_urgent(const TwapState& state, const TwapConfig& config, double elapsed);
bool is_over_executed(const TwapState& state, const TwapConfig& config, double elapsed);

enum class TwapMove : std::uint8_t { limit, market, cancel_and_skip, skip, sweep };

struct TwapDecision {
  TwapMove move = TwapMove::skip;
  int size = 0;
  bool cancel_resting = false;
};

/// One step of the execution flowchart at elapsed time e (seconds since start).
TwapDecision twap_decide(const TwapState& state, const TwapConfig& config, double elapsed);

/// Statistics kept for reporting.
struct TwapRecord {
  double arrival_mid = 0.0;   // ticks
  double start = 0.0;         // absolute seconds
  long long notional = 0; // ticks x units over own fills
  int filled = 0;
  int limit_children = 0;
  long long limit_child_units = 0;
  int market_children = 0;
  long long market_child_units = 0;
  /// Distinct wake instants (scheduled actions taken).
  int wakes = 0;
  bool completed = false;
  double completion_time = -1.0;
  /// (absolute time, cumulative executed) after every fill.
  std::vector<std::pair<double, int>> progress;
  double max_schedule_gap = 0.0;
};

class TwapAgent final : public Agent {
 public:
  /// `config.start_time` is interpreted by the runner; here `start` is absolute.
  TwapAgent(const TwapConfig& config);

  std::string_view kind() const override { return "twap"; }
  void on_activate(const MarketView& view) override;
  std::vector<AgentAction> on_wake(const MarketView& view) override;
  void on_fill(const FillReport& report) override;
  bool wants_followup() const override;

  const TwapConfig& config() const { return config_; }
  const TwapState& state() const { return state_; }
  const TwapRecord& record() const { return record_; }
  bool active() const { return activated_; }
  double elapsed(double time) const { return time - record_.start; }
  /// Volume-weighted average fill price in ticks; 0 if nothing filled.
  double average_price() const;

 private:
  void roll_window(int window);
  void track_gap(double time);

  TwapConfig config_;
  TwapState state_;
  TwapRecord record_;
  bool activated_ = false;
  bool sweeping_ = false;
  double last_time_ = 0.0;
};

}  // namespace hlob
