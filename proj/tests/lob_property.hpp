#pragma once

#include <algorithm>
#include <cstdint>
#include <iterator>
#include <ostream>
#include <string>
#include <unordered_map>
#include <vector>

#include "hlob/event_log.hpp"
#include "hlob/lob.hpp"
#include "hlob/rng.hpp"

namespace hlob::test {

struct LobPropertyResult {
  std::uint64_t operations = 0;
  std::uint64_t applied = 0;
  std::uint64_t crossed = 0;
  std::uint64_t fifo_violations = 0;
  std::uint64_t fill_order_violations = 0;
  std::uint64_t conservation_violations = 0;
  std::uint64_t fills = 0;
  std::uint64_t final_hash = 0;
  long long final_volume = 0;
};

namespace detail {

inline bool queue_is_fifo(const std::deque<Order>& q) {
  for (std::size_t k = 1; k < q.size(); ++k) {
    if (q[k].entry_time < q[k - 1].entry_time) return false;
  }
  return true;
}

inline bool book_is_fifo(const LimitOrderBook& book) {
  const auto orders = book.all_orders();
  for (std::size_t k = 1; k < orders.size(); ++k) {
    const auto& a = orders[k - 1];
    const auto& b = orders[k];
    if (a.side == b.side && a.price == b.price && b.entry_time < a.entry_time) return false;
  }
  return true;
}

inline long long resting_sum(const LimitOrderBook& book) {
  long long v = 0;
  for (const auto& o : book.all_orders()) v += o.size;
  return v;
}

}  // namespace detail

/// Randomized limit, market and cancel traffic from four owners, checking the
/// book invariants after every operation. Every applied operation is written
/// to `log` (if given) so the run can be replayed.
inline LobPropertyResult run_lob_property(std::uint64_t operations, std::uint64_t seed, std::ostream* log_sink) {
  LimitOrderBook book(1000, 0.01);
  EventLog log(book.initial_mid(), book.tick_size(), log_sink);
  Rng rng(seed);
  LobPropertyResult res;
  std::unordered_map<OrderId, double> entry_time;
  double t = 0.0;

  auto record = [&](const AppliedOperation& op, AgentId actor, const std::string& kind) {
    if (log_sink) log.append(make_record(op, t, actor, kind));
  };
  auto seed_side = [&](Side side) {
    const Ticks ref = book.last_best(side);
    const auto placed = book.submit_limit_at(kExogenous, side, ref, 1 + static_cast<int>(rng.uniform() * 3), t);
    if (!placed) return;
    entry_time[placed.id] = t;
    AppliedOperation op;
    op.applied = true;
    op.op = EventClass::limit;
    op.side = side;
    op.price = placed.price;
    op.size = book.find(placed.id)->size;
    op.order_id = placed.id;
    record(op, kExogenous, "seed");
  };

  for (std::uint64_t n = 0; n < operations; ++n) {
    t += 0.001 + 0.01 * rng.uniform();
    for (const Side s : {Side::bid, Side::ask}) {
      if (book.empty(s)) seed_side(s);
    }
    const auto before = book.total_volume();
    const AgentId owner = static_cast<AgentId>(rng.uniform() * 4.0);
    const Side side = rng.uniform() < 0.5 ? Side::bid : Side::ask;
    const double u = rng.uniform();
    AppliedOperation op;
    op.side = side;
    std::string kind;
    long long delta = 0;
    std::vector<Ticks> touched;

    if (u < 0.45) {
      const Slot slot = static_cast<Slot>(static_cast<int>(rng.uniform() * 3.0));
      const int size = 1 + static_cast<int>(rng.uniform() * 5.0);
      const auto placed = book.submit_limit(owner, side, slot, size, t);
      if (placed) {
        entry_time[placed.id] = t;
        op.applied = true;
        op.op = EventClass::limit;
        op.slot = slot;
        op.price = placed.price;
        op.size = size;
        op.order_id = placed.id;
        kind = std::string(to_string(limit_kind(side, slot)));
        delta = size;
        touched.push_back(placed.price);
      }
    } else if (u < 0.62) {
      const Level level = rng.uniform() < 0.5 ? Level::top : Level::deep;
      const auto c = book.cancel_order(owner, side, level, t);
      if (c) {
        op.applied = true;
        op.op = EventClass::cancel;
        op.slot = level == Level::top ? Slot::top : Slot::deep;
        op.price = c->price;
        op.size = c->size;
        op.order_id = c->id;
        kind = std::string(to_string(cancel_kind(side, level)));
        delta = -c->size;
        touched.push_back(c->price);
      }
    } else if (u < 0.70) {
      const auto mine = book.orders_of(owner);
      if (!mine.empty()) {
        const auto& pick = mine[static_cast<std::size_t>(rng.uniform() * static_cast<double>(mine.size()))];
        const auto c = book.cancel_by_id(owner, pick.id);
        if (c) {
          op.applied = true;
          op.op = EventClass::cancel;
          op.side = pick.side;
          op.price = c->price;
          op.size = c->size;
          op.order_id = c->id;
          kind = "cancel_order";
          delta = -c->size;
          touched.push_back(c->price);
        }
      }
    } else {
      const int size = 1 + static_cast<int>(rng.uniform() * 8.0);
      const Direction dir = direction_hitting(side);
      op.fills = book.submit_market(owner, dir, size, t);
      op.op = EventClass::market;
      op.size = size;
      op.applied = !op.fills.empty();
      if (op.applied) op.price = op.fills.front().price;
      kind = std::string(to_string(market_kind(side)));
      for (std::size_t k = 0; k < op.fills.size(); ++k) {
        const auto& f = op.fills[k];
        delta -= f.size;
        touched.push_back(f.price);
        if (k > 0 && op.fills[k - 1].price == f.price &&
            entry_time.at(f.maker_order) < entry_time.at(op.fills[k - 1].maker_order)) {
          ++res.fill_order_violations;
        }
      }
      res.fills += op.fills.size();
    }

    ++res.operations;
    if (op.applied) {
      ++res.applied;
      record(op, owner, kind);
    }
    if (book.total_volume() - before != delta) ++res.conservation_violations;
    const auto q = book.quote_state();
    if (q.two_sided() && !(*q.best_bid < *q.best_ask)) ++res.crossed;
    for (const Ticks p : touched) {
      for (const Side s : {Side::bid, Side::ask}) {
        if (const auto* queue = book.queue_at(s, p); queue && !detail::queue_is_fifo(*queue)) ++res.fifo_violations;
      }
    }
    if (n % 4096 == 0) {
      if (!detail::book_is_fifo(book)) ++res.fifo_violations;
      if (detail::resting_sum(book) != book.total_volume()) ++res.conservation_violations;
    }
  }
  if (!detail::book_is_fifo(book)) ++res.fifo_violations;
  if (detail::resting_sum(book) != book.total_volume()) ++res.conservation_violations;
  res.final_hash = book.hash();
  res.final_volume = book.total_volume();
  return res;
}

}  // namespace hlob::test
