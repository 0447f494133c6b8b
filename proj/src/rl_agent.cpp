#include "hlob/rl_agent.hpp"

#include <algorithm>
#include <cmath>

namespace hlob::rl {

std::vector<double> build_observation(const MarketView& view, const ObservationContext& ctx,
                                      const std::vector<double>& scales, const QuoteState* fallback, bool* stale) {
  if (static_cast<int>(scales.size()) != kObsDim) throw ContractViolation("observation: scale count mismatch");
  QuoteState q = view.quotes;
  const bool one_sided = q.one_sided();
  if (one_sided && fallback) q = *fallback;
  if (stale) *stale = one_sided;

  const double bid = q.best_bid ? static_cast<double>(*q.best_bid) : view.mid - 0.5;
  const double ask = q.best_ask ? static_cast<double>(*q.best_ask) : view.mid + 0.5;
  int own_top_bid = 0;
  int own_top_ask = 0;
  int own_stale = 0;
  for (const auto& o : view.own_orders) {
    if (o.side == Side::bid && q.best_bid && o.price == *q.best_bid) {
      own_top_bid += o.size;
    } else if (o.side == Side::ask && q.best_ask && o.price == *q.best_ask) {
      own_top_ask += o.size;
    } else {
      own_stale += o.size;
    }
  }
  const double top_total = q.bid_top_size + q.ask_top_size;
  const double span = std::max(ctx.end - ctx.start, 1e-9);

  std::vector<double> x(kObsDim);
  x[0] = view.inventory;
  x[1] = std::clamp(bid - ctx.reference_mid, -50.0, 50.0);
  x[2] = std::clamp(ask - ctx.reference_mid, -50.0, 50.0);
  x[3] = std::max(0.0, ask - bid);
  x[4] = q.bid_top_size;
  x[5] = q.ask_top_size;
  x[6] = q.bid_deep_size;
  x[7] = q.ask_deep_size;
  x[8] = top_total > 0 ? (q.bid_top_size - q.ask_top_size) / top_total : 0.0;
  x[9] = own_top_bid;
  x[10] = own_top_ask;
  x[11] = own_stale;
  x[12] = std::clamp((view.time - ctx.start) / span, 0.0, 1.0);
  x[13] = ctx.rho;
  for (int i = 0; i < kObsDim; ++i) {
    x[i] /= scales[i];
    if (i >= 4 && i <= 7) x[i] = std::min(x[i], 5.0);
  }
  return x;
}

ActionMask action_mask(const MarketView& view, int inventory_cap, int order_size) {
  int resting_bid = 0;
  int resting_ask = 0;
  bool top_bid = false;
  bool top_ask = false;
  for (const auto& o : view.own_orders) {
    if (o.side == Side::bid) {
      resting_bid += o.size;
      if (view.quotes.best_bid && o.price == *view.quotes.best_bid) top_bid = true;
    } else {
      resting_ask += o.size;
      if (view.quotes.best_ask && o.price == *view.quotes.best_ask) top_ask = true;
    }
  }
  ActionMask m{};
  m[static_cast<int>(MmAction::place_bid)] = view.inventory + resting_bid + order_size <= inventory_cap;
  m[static_cast<int>(MmAction::place_ask)] = view.inventory - resting_ask - order_size >= -inventory_cap;
  m[static_cast<int>(MmAction::cancel_bid)] = top_bid;
  m[static_cast<int>(MmAction::cancel_ask)] = top_ask;
  m[static_cast<int>(MmAction::skip)] = true;
  return m;
}

MarketMakerAgent::MarketMakerAgent(const PolicyParams& params, const MarketMakerConfig& config, std::uint64_t seed)
    : params_(params), config_(config), rng_(seed) {}

double MarketMakerAgent::mark(const MarketView& view) const {
  return (static_cast<double>(view.cash) + view.inventory * view.mid) * view.tick_size;
}

void MarketMakerAgent::on_activate(const MarketView& view) {
  ctx_.reference_mid = view.mid;
  ctx_.start = view.time;
  ctx_.end = end_;
  tick_size_ = view.tick_size;
  inventory_ = view.inventory;
  prev_mtm_ = mark(view);
  if (view.quotes.two_sided()) last_two_sided_ = view.quotes;
}

void MarketMakerAgent::close_pending(double new_mtm, double extra_fee, bool done) {
  if (!pending_) return;
  const double r = step_reward(prev_mtm_, new_mtm, liquidated_notional_, pending_->intervene,
                               config_.intervention_cost, config_.fee_rate) -
                   extra_fee;
  pending_->reward = r;
  pending_->done = done;
  trajectory_.episode_return += r;
  reward_times_.emplace_back(pending_time_, r);
  trajectory_.samples.push_back(std::move(*pending_));
  pending_.reset();
}

std::vector<AgentAction> MarketMakerAgent::on_wake(const MarketView& view) {
  const double mtm = mark(view);
  close_pending(mtm, 0.0, false);
  prev_mtm_ = mtm;
  liquidated_notional_ = 0.0;
  if (view.quotes.two_sided()) last_two_sided_ = view.quotes;

  ctx_.rho = rho_source_ ? rho_source_(view.time) : 0;
  bool stale = false;
  auto obs = build_observation(view, ctx_, params_.norm_scales, last_two_sided_ ? &*last_two_sided_ : nullptr, &stale);
  if (stale) ++stale_;
  const ActionMask mask = action_mask(view, config_.inventory_cap, config_.order_size);
  forward(params_, obs, mask, forward_);

  bool intervene = false;
  int action = static_cast<int>(MmAction::skip);
  if (config_.stochastic) {
    intervene = rng_.uniform() < forward_.p_intervene;
    if (intervene) action = static_cast<int>(rng_.categorical(forward_.probs, 1.0));
  } else {
    intervene = forward_.p_intervene > 0.5;
    if (intervene) {
      action = static_cast<int>(std::max_element(forward_.probs.begin(), forward_.probs.end()) - forward_.probs.begin());
    }
  }
  Sample s;
  s.obs = std::move(obs);
  s.mask = mask;
  s.intervene = intervene;
  s.action = action;
  s.log_prob = joint_log_prob(forward_, intervene, action);
  s.value = forward_.value_estimate;
  pending_ = std::move(s);
  pending_time_ = view.time;

  if (!intervene) return {AgentAction::skip()};
  ++interventions_;
  switch (static_cast<MmAction>(action)) {
    case MmAction::place_bid:
      return {AgentAction::limit(Side::bid, Slot::top, config_.order_size)};
    case MmAction::place_ask:
      return {AgentAction::limit(Side::ask, Slot::top, config_.order_size)};
    case MmAction::cancel_bid:
      return {AgentAction::cancel(Side::bid, Level::top)};
    case MmAction::cancel_ask:
      return {AgentAction::cancel(Side::ask, Level::top)};
    case MmAction::skip:
      break;
  }
  return {AgentAction::skip()};
}

void MarketMakerAgent::on_fill(const FillReport& r) {
  const int before = inventory_;
  inventory_ += r.direction == Direction::buy ? r.fill.size : -r.fill.size;
  const int reduced = std::max(0, std::abs(before) - std::abs(inventory_));
  const int reducing = std::min(reduced, r.fill.size);
  liquidated_notional_ += static_cast<double>(reducing) * static_cast<double>(r.fill.price) * tick_size_;
}

void MarketMakerAgent::on_episode_end(const MarketView& view) {
  const double mtm = mark(view);
  const double terminal_fee = config_.fee_rate * std::abs(view.inventory) * view.mid * view.tick_size;
  close_pending(mtm, terminal_fee, true);
  prev_mtm_ = mtm;
  if (!trajectory_.samples.empty()) trajectory_.samples.back().done = true;
}

}  // namespace hlob::rl
