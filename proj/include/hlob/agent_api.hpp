#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hlob/event_log.hpp"
#include "hlob/hawkes.hpp"
#include "hlob/lob.hpp"

namespace hlob {

enum class ActionType : std::uint8_t { skip, limit, market, cancel, cancel_order };

/// One agent decision. `limit` and `cancel` name a book side; `market` names a
/// trading direction. `cancel_order` withdraws one specific own order by id.
struct AgentAction {
  ActionType type = ActionType::skip;
  Side side = Side::bid;
  Direction direction = Direction::buy;
  Slot slot = Slot::top;
  Level level = Level::top;
  int size = 0;
  OrderId target = 0;

  static AgentAction skip() { return {}; }
  static AgentAction limit(Side side, Slot slot, int size);
  static AgentAction market(Direction direction, int size);
  static AgentAction cancel(Side side, Level level);
  static AgentAction cancel_order(OrderId id);

  bool places_order() const { return type == ActionType::limit || type == ActionType::market; }
  /// Trading direction implied by the action; nullopt for skips and cancels.
  std::optional<Direction> trade_direction() const;
};

enum class WakeReason : std::uint8_t { timer, market_order_observed, spread_changed };

std::string_view to_string(WakeReason r);

/// Public summary of the most recent book operation.
struct LastEvent {
  double time = 0.0;
  EventClass op = EventClass::limit;
  Side side = Side::bid;
  int size = 0;
  bool own = false;
};

/// What an agent may see on a wake: public quotes plus its own orders and account.
struct MarketView {
  double time = 0.0;
  WakeReason reason = WakeReason::timer;
  QuoteState quotes;
  /// Last two-sided midprice in ticks; stays valid while the book is one-sided.
  double mid = 0.0;
  double tick_size = 0.01;
  int inventory = 0;
  /// Cash in ticks x units.
  long long cash = 0;
  std::vector<Order> own_orders;
  std::optional<LastEvent> last_event;
};

struct FillReport {
  Fill fill;
  bool as_maker = false;
  /// Direction of the receiving agent's side of the trade.
  Direction direction = Direction::buy;
};

class Agent {
 public:
  virtual ~Agent() = default;

  virtual std::string_view kind() const = 0;
  /// Receives event-driven wakes in addition to its timer.
  virtual bool wants_event_wakes() const { return false; }

  /// Called once at the agent's start time, before its first wake.
  virtual void on_activate(const MarketView& /*view*/) {}
  virtual std::vector<AgentAction> on_wake(const MarketView& view) = 0;
  /// Every fill in which this agent is maker or taker.
  virtual void on_fill(const FillReport& /*report*/) {}
  /// True if the agent must be called again at the same instant (e.g. an unfilled sweep).
  virtual bool wants_followup() const { return false; }
  virtual void on_episode_end(const MarketView& /*view*/) {}
};

/// Thrown when an agent raises inside a callback; the episode cannot continue.
class EpisodeAborted : public std::runtime_error {
 public:
  EpisodeAborted(AgentId agent, double time, const std::string& what);
  AgentId agent;
  double time;
};

// ---------------------------------------------------------------------------
// Wake scheduling

struct TimerSpec {
  AgentId agent = 0;
  double start = 0.0;
  double period = 1.0;
  /// Last instant at which the agent may be woken (inclusive).
  double end = 0.0;
  bool event_driven = false;
};

/// A book change other agents may react to.
struct ObservedEvent {
  double time = 0.0;
  AgentId actor = kExogenous;
  bool market_order = false;
  bool bbo_changed = false;

  bool triggers() const { return market_order || bbo_changed; }
  WakeReason reason() const {
    return market_order ? WakeReason::market_order_observed : WakeReason::spread_changed;
  }
};

struct Wake {
  double time = 0.0;
  WakeReason reason = WakeReason::timer;
  AgentId agent = 0;
  /// Index of the triggering event for event-driven wakes.
  std::optional<std::size_t> event_index;
};

/// Timer wakes at start + k * period (k >= 1, up to end) merged with one
/// event-driven wake per (triggering event, subscribed agent other than the
/// actor). Order: time, then timer before event, then agent id; event wakes at
/// equal times keep event order.
std::vector<Wake> schedule_wakes(const std::vector<TimerSpec>& agents,
                                 const std::vector<ObservedEvent>& events);

/// Incremental timer queue used by the episode loop; produces the timer part
/// of schedule_wakes one instant at a time.
class WakeScheduler {
 public:
  void add(const TimerSpec& spec);
  /// Earliest pending timer, +inf if none.
  double next_time() const;
  /// Agents due at exactly next_time(), in id order; advances their timers.
  std::vector<AgentId> pop_due();
  bool subscribed(AgentId agent, double time) const;
  const TimerSpec* spec(AgentId agent) const;

 private:
  struct Entry {
    TimerSpec spec;
    std::uint64_t k = 1;
    double next() const { return spec.start + static_cast<double>(k) * spec.period; }
    bool done() const { return next() > spec.end + 1e-9; }
  };
  std::map<AgentId, Entry> entries_;
};

// ---------------------------------------------------------------------------
// Dispatch

struct Account {
  int inventory = 0;
  long long cash = 0;
  long long bought = 0;
  long long sold = 0;
  long long passive_filled = 0;
  long long aggressive_filled = 0;
  std::uint64_t actions = 0;
  std::uint64_t skips = 0;
  std::uint64_t downgraded = 0;

  /// Cash plus inventory at `mid` (both in ticks).
  double mark_to_market(double mid) const { return static_cast<double>(cash) + inventory * mid; }
};

struct ExchangeConfig {
  Ticks initial_mid = 1000;
  double tick_size = 0.01;
  int initial_levels = 5;
  int initial_orders_per_level = 2;
  int initial_order_size = 2;
  int seed_order_size = 2;
  /// Agent actions enter the Hawkes history as events of the matching type.
  bool agents_excite = true;
  int max_order_size = 100000;
};

/// Result of one applied operation (or of a whole wake) as seen by other agents.
struct OperationOutcome {
  bool applied = false;
  bool registered = false;
  ObservedEvent observed;
};

struct ExchangeCounters {
  std::uint64_t exogenous_events = 0;
  std::uint64_t exogenous_dropped = 0;
  std::uint64_t seeds = 0;
  long long exogenous_mo_volume = 0;
  long long total_traded_volume = 0;
};

/// Book, event log, Hawkes history and per-agent accounts of one episode.
class Exchange {
 public:
  Exchange(const ExchangeConfig& config, const hawkes::HawkesParams& params, EventLog* log);

  void seed_initial_book(double time);
  void register_agent(AgentId id, Agent* agent);

  /// Registers the event in the Hawkes history and routes it into the book.
  OperationOutcome apply_exogenous(const hawkes::MarketEvent& event);

  /// Calls the agent, validates and applies every returned action. Infeasible
  /// actions are downgraded to skips and counted. Agent exceptions become
  /// EpisodeAborted.
  OperationOutcome dispatch(AgentId id, double time, WakeReason reason);

  void activate(AgentId id, double time);
  void finish(AgentId id, double time);

  MarketView view_for(AgentId id, double time, WakeReason reason) const;

  const LimitOrderBook& book() const { return book_; }
  LimitOrderBook& book() { return book_; }
  hawkes::EventHistory& history() { return history_; }
  const hawkes::EventHistory& history() const { return history_; }
  const hawkes::HawkesParams& params() const { return params_; }
  const Account& account(AgentId id) const;
  const ExchangeCounters& counters() const { return counters_; }
  double mid() const { return book_.last_mid(); }

 private:
  OperationOutcome apply_action(AgentId id, const AgentAction& action, double time);
  void settle(const std::vector<Fill>& fills);
  void register_flow(EventKind kind, double time);
  void ensure_two_sided(double time);
  void log(const AppliedOperation& op, double time, AgentId actor, std::string kind);
  void note_last(EventClass op, Side side, int size, double time, AgentId actor);

  ExchangeConfig config_;
  const hawkes::HawkesParams& params_;
  EventLog* log_;
  LimitOrderBook book_;
  hawkes::EventHistory history_;
  std::map<AgentId, Agent*> agents_;
  std::map<AgentId, Account> accounts_;
  ExchangeCounters counters_;
  std::optional<LastEvent> last_event_;
  AgentId last_actor_ = kExogenous;
};

}  // namespace hlob
