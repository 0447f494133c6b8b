#include "hlob/agent_api.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace hlob {

AgentAction AgentAction::limit(Side side, Slot slot, int size) {
  AgentAction a;
  a.type = ActionType::limit;
  a.side = side;
  a.slot = slot;
  a.size = size;
  return a;
}

AgentAction AgentAction::market(Direction direction, int size) {
  AgentAction a;
  a.type = ActionType::market;
  a.direction = direction;
  a.side = side_hit_by(direction);
  a.size = size;
  return a;
}

AgentAction AgentAction::cancel(Side side, Level level) {
  AgentAction a;
  a.type = ActionType::cancel;
  a.side = side;
  a.level = level;
  return a;
}

AgentAction AgentAction::cancel_order(OrderId id) {
  AgentAction a;
  a.type = ActionType::cancel_order;
  a.target = id;
  return a;
}

std::optional<Direction> AgentAction::trade_direction() const {
  switch (type) {
    case ActionType::limit:
      return side == Side::bid ? Direction::buy : Direction::sell;
    case ActionType::market:
      return direction;
    default:
      return std::nullopt;
  }
}

std::string_view to_string(WakeReason r) {
  switch (r) {
    case WakeReason::timer:
      return "timer";
    case WakeReason::market_order_observed:
      return "market_order_observed";
    case WakeReason::spread_changed:
      return "spread_changed";
  }
  return "?";
}

EpisodeAborted::EpisodeAborted(AgentId agent_id, double t, const std::string& what)
    : std::runtime_error("agent " + std::to_string(agent_id) + " failed at t=" + std::to_string(t) + ": " + what),
      agent(agent_id),
      time(t) {}

// ---------------------------------------------------------------------------

std::vector<Wake> schedule_wakes(const std::vector<TimerSpec>& agents, const std::vector<ObservedEvent>& events) {
  std::vector<Wake> out;
  for (const auto& a : agents) {
    if (!(a.period > 0.0)) throw ContractViolation("wake period must be positive");
    for (std::uint64_t k = 1;; ++k) {
      const double t = a.start + static_cast<double>(k) * a.period;
      if (t > a.end + 1e-9) break;
      out.push_back({t, WakeReason::timer, a.agent, std::nullopt});
    }
  }
  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto& e = events[i];
    if (!e.triggers()) continue;
    for (const auto& a : agents) {
      if (!a.event_driven || a.agent == e.actor) continue;
      if (e.time < a.start || e.time > a.end) continue;
      out.push_back({e.time, e.reason(), a.agent, i});
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const Wake& x, const Wake& y) {
    if (x.time != y.time) return x.time < y.time;
    const bool xt = x.reason == WakeReason::timer;
    const bool yt = y.reason == WakeReason::timer;
    if (xt != yt) return xt;
    if (!xt) return false;
    return x.agent < y.agent;
  });
  return out;
}

void WakeScheduler::add(const TimerSpec& spec) {
  if (!(spec.period > 0.0)) throw ContractViolation("wake period must be positive");
  entries_[spec.agent] = Entry{spec, 1};
}

double WakeScheduler::next_time() const {
  double t = std::numeric_limits<double>::infinity();
  for (const auto& [id, e] : entries_) {
    if (!e.done()) t = std::min(t, e.next());
  }
  return t;
}

std::vector<AgentId> WakeScheduler::pop_due() {
  const double t = next_time();
  std::vector<AgentId> due;
  if (!std::isfinite(t)) return due;
  for (auto& [id, e] : entries_) {
    if (!e.done() && e.next() == t) {
      due.push_back(id);
      ++e.k;
    }
  }
  return due;
}

bool WakeScheduler::subscribed(AgentId agent, double time) const {
  const auto it = entries_.find(agent);
  if (it == entries_.end()) return false;
  const auto& s = it->second.spec;
  return s.event_driven && time >= s.start && time <= s.end;
}

const TimerSpec* WakeScheduler::spec(AgentId agent) const {
  const auto it = entries_.find(agent);
  return it == entries_.end() ? nullptr : &it->second.spec;
}

// ---------------------------------------------------------------------------

namespace {

constexpr int kMaxFollowups = 100;

struct Bbo {
  std::optional<Ticks> bid;
  std::optional<Ticks> ask;
  bool operator==(const Bbo&) const = default;
};

Bbo bbo_of(const LimitOrderBook& b) { return {b.best(Side::bid), b.best(Side::ask)}; }

}  // namespace

Exchange::Exchange(const ExchangeConfig& config, const hawkes::HawkesParams& params, EventLog* log)
    : config_(config), params_(params), log_(log), book_(config.initial_mid, config.tick_size) {}

void Exchange::log(const AppliedOperation& op, double time, AgentId actor, std::string kind) {
  if (log_) log_->append(make_record(op, time, actor, std::move(kind)));
}

void Exchange::note_last(EventClass op, Side side, int size, double time, AgentId actor) {
  last_event_ = LastEvent{time, op, side, size, false};
  last_actor_ = actor;
}

void Exchange::seed_initial_book(double time) {
  for (int lvl = 0; lvl < config_.initial_levels; ++lvl) {
    for (const Side side : {Side::bid, Side::ask}) {
      const Ticks price = side == Side::bid ? config_.initial_mid - 1 - lvl : config_.initial_mid + 1 + lvl;
      for (int k = 0; k < config_.initial_orders_per_level; ++k) {
        const auto placed = book_.submit_limit_at(kExogenous, side, price, config_.initial_order_size, time);
        AppliedOperation op;
        op.applied = true;
        op.op = EventClass::limit;
        op.side = side;
        op.price = price;
        op.size = config_.initial_order_size;
        op.order_id = placed.id;
        log(op, time, kExogenous, "seed");
      }
    }
  }
}

void Exchange::ensure_two_sided(double time) {
  for (const Side side : {Side::bid, Side::ask}) {
    if (!book_.empty(side)) continue;
    // Away from the spread, never crossing the opposite best.
    Ticks price = side == Side::bid ? book_.last_best(side) - 1 : book_.last_best(side) + 1;
    if (const auto opp = book_.best(opposite(side))) {
      price = side == Side::bid ? std::min(price, *opp - 1) : std::max(price, *opp + 1);
    }
    price = std::max<Ticks>(price, 1);
    const auto placed = book_.submit_limit_at(kExogenous, side, price, config_.seed_order_size, time);
    if (!placed) continue;
    AppliedOperation op;
    op.applied = true;
    op.op = EventClass::limit;
    op.side = side;
    op.price = price;
    op.size = config_.seed_order_size;
    op.order_id = placed.id;
    log(op, time, kExogenous, "seed");
    ++counters_.seeds;
  }
}

void Exchange::register_agent(AgentId id, Agent* agent) {
  if (id == kExogenous) throw ContractViolation("agent id 0 is reserved for exogenous flow");
  agents_[id] = agent;
  accounts_[id];
}

const Account& Exchange::account(AgentId id) const {
  static const Account empty;
  const auto it = accounts_.find(id);
  return it == accounts_.end() ? empty : it->second;
}

void Exchange::register_flow(EventKind kind, double time) { history_.register_event(params_, kind, time); }

void Exchange::settle(const std::vector<Fill>& fills) {
  for (const auto& f : fills) {
    counters_.total_traded_volume += f.size;
    const long long notional = static_cast<long long>(f.price) * f.size;
    auto book_trade = [&](AgentId who, Direction dir, bool maker) {
      if (who == kExogenous) return;
      auto& acc = accounts_[who];
      if (dir == Direction::buy) {
        acc.inventory += f.size;
        acc.cash -= notional;
        acc.bought += f.size;
      } else {
        acc.inventory -= f.size;
        acc.cash += notional;
        acc.sold += f.size;
      }
      (maker ? acc.passive_filled : acc.aggressive_filled) += f.size;
      if (const auto it = agents_.find(who); it != agents_.end() && it->second) {
        it->second->on_fill(FillReport{f, maker, dir});
      }
    };
    book_trade(f.taker, f.taker_direction, false);
    book_trade(f.maker, f.taker_direction == Direction::buy ? Direction::sell : Direction::buy, true);
  }
}

OperationOutcome Exchange::apply_exogenous(const hawkes::MarketEvent& event) {
  register_flow(event.kind, event.time);
  ++counters_.exogenous_events;
  const Bbo before = bbo_of(book_);
  AppliedOperation op = apply_market_event(book_, event);
  OperationOutcome out;
  out.registered = true;
  out.observed.time = event.time;
  out.observed.actor = kExogenous;
  if (!op.applied) {
    ++counters_.exogenous_dropped;
    ensure_two_sided(event.time);
    return out;
  }
  out.applied = true;
  if (op.op == EventClass::market) {
    for (const auto& f : op.fills) counters_.exogenous_mo_volume += f.size;
    out.observed.market_order = true;
  }
  log(op, event.time, kExogenous, std::string(to_string(event.kind)));
  note_last(op.op, op.side, op.op == EventClass::market ? event.size : op.size, event.time, kExogenous);
  settle(op.fills);
  ensure_two_sided(event.time);
  out.observed.bbo_changed = !(bbo_of(book_) == before);
  return out;
}

OperationOutcome Exchange::apply_action(AgentId id, const AgentAction& action, double time) {
  auto& acc = accounts_[id];
  ++acc.actions;
  OperationOutcome out;
  out.observed.time = time;
  out.observed.actor = id;
  if (action.type == ActionType::skip) {
    ++acc.skips;
    return out;
  }
  if (action.places_order() && (action.size < 1 || action.size > config_.max_order_size)) {
    ++acc.downgraded;
    return out;
  }
  const Bbo before = bbo_of(book_);
  AppliedOperation op;
  std::optional<EventKind> flow;
  std::string kind;
  switch (action.type) {
    case ActionType::limit: {
      const auto placed = book_.submit_limit(id, action.side, action.slot, action.size, time);
      if (!placed) break;
      op.applied = true;
      op.op = EventClass::limit;
      op.side = action.side;
      op.slot = action.slot;
      op.price = placed.price;
      op.size = action.size;
      op.order_id = placed.id;
      flow = limit_kind(action.side, action.slot);
      break;
    }
    case ActionType::market: {
      const Side hit = side_hit_by(action.direction);
      op.fills = book_.submit_market(id, action.direction, action.size, time);
      if (op.fills.empty()) break;
      op.applied = true;
      op.op = EventClass::market;
      op.side = hit;
      op.price = op.fills.front().price;
      op.size = action.size;
      flow = market_kind(hit);
      break;
    }
    case ActionType::cancel: {
      const auto cancelled = book_.cancel_order(id, action.side, action.level, time);
      if (!cancelled) break;
      op.applied = true;
      op.op = EventClass::cancel;
      op.side = action.side;
      op.slot = action.level == Level::top ? Slot::top : Slot::deep;
      op.price = cancelled->price;
      op.size = cancelled->size;
      op.order_id = cancelled->id;
      flow = cancel_kind(action.side, action.level);
      break;
    }
    case ActionType::cancel_order: {
      const Order* target = book_.find(action.target);
      if (!target || target->owner != id) break;
      const Side side = target->side;
      const auto top = book_.level_price(side, Level::top);
      const auto deep = book_.level_price(side, Level::deep);
      std::optional<Level> level;
      if (top && target->price == *top) level = Level::top;
      else if (deep && target->price == *deep) level = Level::deep;
      const auto cancelled = book_.cancel_by_id(id, action.target);
      if (!cancelled) break;
      op.applied = true;
      op.op = EventClass::cancel;
      op.side = side;
      if (level) op.slot = *level == Level::top ? Slot::top : Slot::deep;
      op.price = cancelled->price;
      op.size = cancelled->size;
      op.order_id = cancelled->id;
      if (level) flow = cancel_kind(side, *level);
      break;
    }
    case ActionType::skip:
      break;
  }
  if (!op.applied) {
    ++acc.downgraded;
    return out;
  }
  if (flow) {
    kind = std::string(to_string(*flow));
  } else {
    kind = action.type == ActionType::cancel_order ? "co_other" : "agent";
  }
  out.applied = true;
  log(op, time, id, kind);
  note_last(op.op, op.side, op.size, time, id);
  if (flow && config_.agents_excite) {
    // Volume-equivalent: an agent order counts as as many events as typical
    // exogenous orders of its type it amounts to (at least one).
    int volume = op.size;
    if (op.op == EventClass::market) {
      volume = 0;
      for (const auto& f : op.fills) volume += f.size;
    }
    const double mean = params_.size_mean[index_of(*flow)];
    const int events = std::max(1, static_cast<int>(std::lround(volume / mean)));
    for (int k = 0; k < events; ++k) register_flow(*flow, time);
    out.registered = true;
  }
  settle(op.fills);
  ensure_two_sided(time);
  out.observed.market_order = op.op == EventClass::market;
  out.observed.bbo_changed = !(bbo_of(book_) == before);
  return out;
}

MarketView Exchange::view_for(AgentId id, double time, WakeReason reason) const {
  MarketView v;
  v.time = time;
  v.reason = reason;
  v.quotes = book_.quote_state();
  v.mid = book_.last_mid();
  v.tick_size = book_.tick_size();
  const auto& acc = account(id);
  v.inventory = acc.inventory;
  v.cash = acc.cash;
  v.own_orders = book_.orders_of(id);
  if (last_event_) {
    v.last_event = last_event_;
    v.last_event->own = last_actor_ == id;
  }
  return v;
}

void Exchange::activate(AgentId id, double time) {
  Agent* agent = agents_.at(id);
  try {
    agent->on_activate(view_for(id, time, WakeReason::timer));
  } catch (const std::exception& e) {
    throw EpisodeAborted(id, time, e.what());
  }
}

void Exchange::finish(AgentId id, double time) {
  Agent* agent = agents_.at(id);
  try {
    agent->on_episode_end(view_for(id, time, WakeReason::timer));
  } catch (const std::exception& e) {
    throw EpisodeAborted(id, time, e.what());
  }
}

OperationOutcome Exchange::dispatch(AgentId id, double time, WakeReason reason) {
  Agent* agent = agents_.at(id);
  OperationOutcome total;
  total.observed.time = time;
  total.observed.actor = id;
  for (int round = 0; round <= kMaxFollowups; ++round) {
    std::vector<AgentAction> actions;
    try {
      actions = agent->on_wake(view_for(id, time, round == 0 ? reason : WakeReason::timer));
    } catch (const std::exception& e) {
      throw EpisodeAborted(id, time, e.what());
    }
    if (actions.empty()) actions.push_back(AgentAction::skip());
    for (const auto& a : actions) {
      const auto r = apply_action(id, a, time);
      total.applied |= r.applied;
      total.registered |= r.registered;
      total.observed.market_order |= r.observed.market_order;
      total.observed.bbo_changed |= r.observed.bbo_changed;
    }
    bool again = false;
    try {
      again = agent->wants_followup();
    } catch (const std::exception& e) {
      throw EpisodeAborted(id, time, e.what());
    }
    if (!again) break;
  }
  return total;
}

}  // namespace hlob
