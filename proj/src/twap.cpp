#include "hlob/twap.hpp"

#include <algorithm>
#include <cmath>

namespace hlob {

namespace {

constexpr double kTimeEps = 1e-9;

}  // namespace

void TwapConfig::validate() const {
  if (quantity < 1) throw ConfigError("twap: Q must be >= 1");
  if (!(horizon > 0.0)) throw ConfigError("twap: T must be positive");
  if (!(window > 0.0) || window > horizon) throw ConfigError("twap: window must satisfy 0 < W <= T");
  if (!(period > 0.0) || period > window) throw ConfigError("twap: period must satisfy 0 < f <= W");
  if (!(urgency_time_frac > 0.0 && urgency_time_frac < 1.0)) throw ConfigError("twap: urgency_time_frac must be in (0,1)");
  if (!(urgency_fill_frac > 0.0 && urgency_fill_frac < 1.0)) throw ConfigError("twap: urgency_fill_frac must be in (0,1)");
  if (start_time < 0.0) throw ConfigError("twap: start_time must be >= 0");
}

TwapConfig TwapConfig::from_json(const nlohmann::json& j) {
  TwapConfig c;
  c.side = parse_direction(j.value("side", std::string("buy")));
  c.quantity = j.value("Q", c.quantity);
  c.horizon = j.value("T", c.horizon);
  c.window = j.value("window", c.window);
  c.period = j.value("period", c.period);
  c.start_time = j.value("start_time", c.start_time);
  c.urgency_time_frac = j.value("urgency_time_frac", c.urgency_time_frac);
  c.urgency_fill_frac = j.value("urgency_fill_frac", c.urgency_fill_frac);
  c.validate();
  return c;
}

nlohmann::json TwapConfig::to_json() const {
  return {{"side", to_string(side)},         {"Q", quantity},
          {"T", horizon},                    {"window", window},
          {"period", period},                {"start_time", start_time},
          {"urgency_time_frac", urgency_time_frac}, {"urgency_fill_frac", urgency_fill_frac}};
}

double expected_child_size(const TwapConfig& c) { return static_cast<double>(c.quantity) * c.period / c.horizon; }

int window_of(const TwapConfig& c, double elapsed) {
  const int w = static_cast<int>(std::ceil(elapsed / c.window - kTimeEps)) - 1;
  const int last = static_cast<int>(std::ceil(c.horizon / c.window - kTimeEps)) - 1;
  return std::clamp(w, 0, std::max(last, 0));
}

double window_elapsed_fraction(const TwapConfig& c, double elapsed) {
  const int w = window_of(c, elapsed);
  const double begin = w * c.window;
  const double end = std::min(c.horizon, begin + c.window);
  return std::clamp((elapsed - begin) / (end - begin), 0.0, 1.0);
}

int actions_remaining(const TwapConfig& c, double elapsed) {
  const double left = std::max(0.0, c.horizon - elapsed);
  return static_cast<int>(std::lround(left / c.period)) + 1;
}

double window_fill_fraction(const TwapState& s) {
  if (s.window_lo_units <= 0) return 1.0;
  return static_cast<double>(s.window_lo_filled) / static_cast<double>(s.window_lo_units);
}

bool is_urgent(const TwapState& s, const TwapConfig& c, double elapsed) {
  return window_elapsed_fraction(c, elapsed) >= c.urgency_time_frac && window_fill_fraction(s) < c.urgency_fill_frac;
}

bool is_over_executed(const TwapState& s, const TwapConfig& c, double elapsed) {
  const double schedule = c.quantity * std::clamp(elapsed / c.horizon, 0.0, 1.0);
  return static_cast<double>(s.executed) > schedule + expected_child_size(c);
}

TwapDecision twap_decide(const TwapState& s, const TwapConfig& c, double elapsed) {
  const int q_rem = s.remaining(c);
  if (elapsed >= c.horizon - kTimeEps) {
    return {TwapMove::sweep, std::max(q_rem, 0), true};
  }
  if (q_rem <= 0 || is_over_executed(s, c, elapsed)) {
    return {TwapMove::cancel_and_skip, 0, s.resting > 0};
  }
  if (is_urgent(s, c, elapsed)) {
    const int w = window_of(c, elapsed);
    const double begin = w * c.window;
    const double end = std::min(c.horizon, begin + c.window);
    const int window_target = static_cast<int>(std::lround(c.quantity * (end - begin) / c.horizon));
    const int size = std::min(window_target - s.window_executed, q_rem);
    if (size > 0) return {TwapMove::market, size, s.resting > 0};
  }
  const int unplaced = q_rem - s.resting;
  if (unplaced <= 0) return {TwapMove::skip, 0, false};
  const int a_rem = actions_remaining(c, elapsed);
  const int q_lim = std::min((unplaced + a_rem - 1) / a_rem, unplaced);
  return {TwapMove::limit, q_lim, false};
}

// ---------------------------------------------------------------------------

TwapAgent::TwapAgent(const TwapConfig& config) : config_(config) { config_.validate(); }

void TwapAgent::on_activate(const MarketView& view) {
  activated_ = true;
  record_.arrival_mid = view.mid;
  record_.start = view.time;
  last_time_ = view.time;
  state_ = TwapState{};
}

void TwapAgent::roll_window(int window) {
  if (window == state_.window_index) return;
  state_.window_index = window;
  state_.window_executed = 0;
  state_.window_lo_units = state_.resting;
  state_.window_lo_filled = 0;
}

void TwapAgent::track_gap(double time) {
  const double e = std::clamp(elapsed(time), 0.0, config_.horizon);
  const double gap = std::abs(state_.executed - config_.quantity * e / config_.horizon);
  record_.max_schedule_gap = std::max(record_.max_schedule_gap, gap);
}

std::vector<AgentAction> TwapAgent::on_wake(const MarketView& view) {
  const double e = elapsed(view.time);
  if (record_.wakes == 0 || view.time != last_time_) ++record_.wakes;
  last_time_ = view.time;
  int resting = 0;
  for (const auto& o : view.own_orders) resting += o.size;
  state_.resting = resting;
  roll_window(window_of(config_, e));
  track_gap(view.time);

  const Side own_side = passive_side(config_.side);
  const TwapDecision d = twap_decide(state_, config_, e);
  std::vector<AgentAction> actions;
  if (d.cancel_resting) {
    for (const auto& o : view.own_orders) actions.push_back(AgentAction::cancel_order(o.id));
    state_.resting = 0;
  }
  switch (d.move) {
    case TwapMove::sweep:
      sweeping_ = true;
      [[fallthrough]];
    case TwapMove::market:
      if (d.size > 0) {
        actions.push_back(AgentAction::market(config_.side, d.size));
        ++record_.market_children;
        record_.market_child_units += d.size;
      }
      break;
    case TwapMove::limit:
      actions.push_back(AgentAction::limit(own_side, Slot::top, d.size));
      state_.resting += d.size;
      state_.window_lo_units += d.size;
      ++record_.limit_children;
      record_.limit_child_units += d.size;
      break;
    case TwapMove::cancel_and_skip:
    case TwapMove::skip:
      break;
  }
  if (actions.empty()) actions.push_back(AgentAction::skip());
  return actions;
}

void TwapAgent::on_fill(const FillReport& r) {
  if (!activated_) return;
  const double e = elapsed(r.fill.time);
  if (e > 0.0 && e < config_.horizon) roll_window(window_of(config_, e));
  state_.executed += r.fill.size;
  state_.window_executed += r.fill.size;
  if (r.as_maker) {
    state_.resting = std::max(0, state_.resting - r.fill.size);
    state_.window_lo_filled += r.fill.size;
  }
  record_.notional += static_cast<long long>(r.fill.price) * r.fill.size;
  record_.filled += r.fill.size;
  record_.progress.emplace_back(r.fill.time, state_.executed);
  if (state_.executed >= config_.quantity && !record_.completed) {
    record_.completed = true;
    record_.completion_time = r.fill.time;
  }
  track_gap(r.fill.time);
}

bool TwapAgent::wants_followup() const { return sweeping_ && state_.remaining(config_) > 0; }

double TwapAgent::average_price() const {
  if (record_.filled == 0) return 0.0;
  return static_cast<double>(record_.notional) / record_.filled;
}

}  // namespace hlob
