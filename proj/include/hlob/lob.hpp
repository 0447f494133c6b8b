#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <unordered_map>
#include <vector>

#include "hlob/hawkes.hpp"
#include "hlob/types.hpp"

namespace hlob {

struct Order {
  OrderId id = 0;
  AgentId owner = kExogenous;
  Side side = Side::bid;
  Ticks price = 0;
  int size = 0;
  double entry_time = 0.0;
};

struct Fill {
  AgentId taker = kExogenous;
  AgentId maker = kExogenous;
  OrderId maker_order = 0;
  Direction taker_direction = Direction::buy;
  Ticks price = 0;
  int size = 0;
  double time = 0.0;
};

enum class PlaceStatus : std::uint8_t { placed, no_room_in_spread, would_cross };

struct PlaceResult {
  PlaceStatus status = PlaceStatus::placed;
  OrderId id = 0;
  Ticks price = 0;

  explicit operator bool() const { return status == PlaceStatus::placed; }
};

struct CancelResult {
  OrderId id = 0;
  Ticks price = 0;
  int size = 0;
};

/// Snapshot of the visible two-level book.
struct QuoteState {
  std::optional<Ticks> best_bid;
  std::optional<Ticks> best_ask;
  int bid_top_size = 0;
  int ask_top_size = 0;
  int bid_deep_size = 0;
  int ask_deep_size = 0;

  bool two_sided() const { return best_bid.has_value() && best_ask.has_value(); }
  bool one_sided() const { return !two_sided(); }
  /// Midprice in ticks; only meaningful when two-sided.
  double mid() const { return two_sided() ? 0.5 * static_cast<double>(*best_bid + *best_ask) : 0.0; }
  Ticks spread() const { return two_sided() ? *best_ask - *best_bid : 0; }
};

/// Price-time priority book on an integer tick grid.
///
/// "top" is the best price of a side, "deep" one tick behind it and
/// "inspread" one tick inside the spread. Not thread-safe.
class LimitOrderBook {
 public:
  explicit LimitOrderBook(Ticks initial_mid = 1000, double tick_size = 0.01);

  PlaceResult submit_limit(AgentId owner, Side side, Slot slot, int size, double time);

  /// Places at an explicit price; used for seeding and log replay. Refuses crossing prices.
  PlaceResult submit_limit_at(AgentId owner, Side side, Ticks price, int size, double time);

  /// Walks the opposite side in price then FIFO order. Volume beyond what rests
  /// on that side is discarded.
  std::vector<Fill> submit_market(AgentId owner, Direction direction, int size, double time);

  /// Cancels the owner's oldest resting order at the named level of `side`.
  std::optional<CancelResult> cancel_order(AgentId owner, Side side, Level level, double time);

  /// Cancels one specific order if it belongs to `owner`.
  std::optional<CancelResult> cancel_by_id(AgentId owner, OrderId id);

  QuoteState quote_state() const;

  std::optional<Ticks> best(Side side) const;
  /// Last best price seen on a side (current best when the side is non-empty).
  Ticks last_best(Side side) const { return side == Side::bid ? last_bid_ : last_ask_; }
  /// Last two-sided midprice, in ticks.
  double last_mid() const { return last_mid_; }

  /// Price of a slot for `side` under the current quotes, if it can be placed.
  PlaceResult resolve_slot(Side side, Slot slot) const;
  std::optional<Ticks> level_price(Side side, Level level) const;

  int volume_at(Side side, Ticks price) const;
  const std::deque<Order>* queue_at(Side side, Ticks price) const;
  long long total_volume() const { return total_volume_; }
  std::size_t order_count() const { return index_.size(); }
  bool empty(Side side) const { return side == Side::bid ? bids_.empty() : asks_.empty(); }

  const Order* find(OrderId id) const;
  std::vector<Order> orders_of(AgentId owner) const;
  /// Every resting order, bids best-first then asks best-first, FIFO within a level.
  std::vector<Order> all_orders() const;

  /// FNV-1a over (side, price, id, owner, size, entry time) of every resting order.
  std::uint64_t hash() const;

  double tick_size() const { return tick_size_; }
  Ticks initial_mid() const { return initial_mid_; }
  OrderId next_order_id() const { return next_id_; }

 private:
  using BidBook = std::map<Ticks, std::deque<Order>, std::greater<>>;
  using AskBook = std::map<Ticks, std::deque<Order>, std::less<>>;

  template <typename Book>
  std::optional<CancelResult> cancel_oldest_in(Book& book, AgentId owner, Ticks price);
  template <typename Book>
  void sweep(Book& book, AgentId owner, Direction direction, int& remaining, double time,
             std::vector<Fill>& fills);
  void refresh_quotes();
  void erase_from_index(OrderId id) { index_.erase(id); }

  Ticks initial_mid_;
  double tick_size_;
  BidBook bids_;
  AskBook asks_;
  std::unordered_map<OrderId, std::pair<Side, Ticks>> index_;
  OrderId next_id_ = 1;
  long long total_volume_ = 0;
  Ticks last_bid_;
  Ticks last_ask_;
  double last_mid_;
};

/// Outcome of one book mutation, in the shape the event log records.
struct AppliedOperation {
  bool applied = false;
  EventClass op = EventClass::limit;
  Side side = Side::bid;
  std::optional<Slot> slot;
  Ticks price = 0;
  int size = 0;
  OrderId order_id = 0;
  std::vector<Fill> fills;
};

/// Routes one Hawkes event into the book with owner = exogenous. Infeasible
/// events (in-spread with a one-tick spread, cancel on an empty level, market
/// order against an empty side) come back with applied = false.
AppliedOperation apply_market_event(LimitOrderBook& book, const hawkes::MarketEvent& event);

}  // namespace hlob
