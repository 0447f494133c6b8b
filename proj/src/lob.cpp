#include "hlob/lob.hpp"

#include <algorithm>
#include <bit>

namespace hlob {

namespace {

class Fnv1a {
 public:
  void add(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h_ ^= (v >> (8 * i)) & 0xffU;
      h_ *= 0x100000001b3ULL;
    }
  }
  std::uint64_t value() const { return h_; }

 private:
  std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

void require_positive_size(int size) {
  if (size < 1) throw ContractViolation("order size must be >= 1");
}

}  // namespace

LimitOrderBook::LimitOrderBook(Ticks initial_mid, double tick_size)
    : initial_mid_(initial_mid),
      tick_size_(tick_size),
      last_bid_(initial_mid - 1),
      last_ask_(initial_mid + 1),
      last_mid_(static_cast<double>(initial_mid)) {
  if (!(tick_size > 0.0)) throw ConfigError("tick size must be positive");
  if (initial_mid < 2) throw ConfigError("initial mid must be at least 2 ticks");
}

std::optional<Ticks> LimitOrderBook::best(Side side) const {
  if (side == Side::bid) {
    if (bids_.empty()) return std::nullopt;
    return bids_.begin()->first;
  }
  if (asks_.empty()) return std::nullopt;
  return asks_.begin()->first;
}

std::optional<Ticks> LimitOrderBook::level_price(Side side, Level level) const {
  const auto b = best(side);
  if (!b) return std::nullopt;
  if (level == Level::top) return *b;
  return side == Side::bid ? *b - 1 : *b + 1;
}

PlaceResult LimitOrderBook::resolve_slot(Side side, Slot slot) const {
  const auto own = best(side);
  const auto opp = best(opposite(side));
  const Ticks ref = own.value_or(last_best(side));
  // Signed step towards the spread: +1 for bids, -1 for asks.
  const Ticks inward = side == Side::bid ? 1 : -1;
  auto crosses = [&](Ticks p) {
    if (!opp) return false;
    return side == Side::bid ? p >= *opp : p <= *opp;
  };

  PlaceResult r;
  switch (slot) {
    case Slot::top:
      r.price = ref;
      if (crosses(r.price)) r.price = *opp - inward;
      break;
    case Slot::deep:
      r.price = ref - inward;
      if (crosses(r.price + inward)) r.price = *opp - 2 * inward;
      break;
    case Slot::inspread:
      r.price = ref + inward;
      if (crosses(r.price)) {
        r.status = PlaceStatus::no_room_in_spread;
        return r;
      }
      break;
  }
  if (r.price < 1) {
    r.status = PlaceStatus::would_cross;
  }
  return r;
}

PlaceResult LimitOrderBook::submit_limit(AgentId owner, Side side, Slot slot, int size, double time) {
  require_positive_size(size);
  PlaceResult where = resolve_slot(side, slot);
  if (!where) return where;
  return submit_limit_at(owner, side, where.price, size, time);
}

PlaceResult LimitOrderBook::submit_limit_at(AgentId owner, Side side, Ticks price, int size,
                                            double time) {
  require_positive_size(size);
  PlaceResult r;
  r.price = price;
  const auto opp = best(opposite(side));
  if (price < 1 || (opp && (side == Side::bid ? price >= *opp : price <= *opp))) {
    r.status = PlaceStatus::would_cross;
    return r;
  }
  Order o{next_id_++, owner, side, price, size, time};
  r.id = o.id;
  index_.emplace(o.id, std::make_pair(side, price));
  if (side == Side::bid) {
    bids_[price].push_back(o);
  } else {
    asks_[price].push_back(o);
  }
  total_volume_ += size;
  refresh_quotes();
  return r;
}

template <typename Book>
void LimitOrderBook::sweep(Book& book, AgentId owner, Direction direction, int& remaining,
                           double time, std::vector<Fill>& fills) {
  while (remaining > 0 && !book.empty()) {
    auto level = book.begin();
    auto& queue = level->second;
    while (remaining > 0 && !queue.empty()) {
      Order& maker = queue.front();
      const int take = std::min(remaining, maker.size);
      fills.push_back(Fill{owner, maker.owner, maker.id, direction, maker.price, take, time});
      maker.size -= take;
      remaining -= take;
      total_volume_ -= take;
      if (maker.size == 0) {
        erase_from_index(maker.id);
        queue.pop_front();
      }
    }
    if (queue.empty()) book.erase(level);
  }
}

std::vector<Fill> LimitOrderBook::submit_market(AgentId owner, Direction direction, int size,
                                                double time) {
  require_positive_size(size);
  std::vector<Fill> fills;
  int remaining = size;
  if (direction == Direction::buy) {
    sweep(asks_, owner, direction, remaining, time, fills);
  } else {
    sweep(bids_, owner, direction, remaining, time, fills);
  }
  refresh_quotes();
  return fills;
}

template <typename Book>
std::optional<CancelResult> LimitOrderBook::cancel_oldest_in(Book& book, AgentId owner, Ticks price) {
  auto level = book.find(price);
  if (level == book.end()) return std::nullopt;
  auto& queue = level->second;
  auto it = std::find_if(queue.begin(), queue.end(), [owner](const Order& o) { return o.owner == owner; });
  if (it == queue.end()) return std::nullopt;
  CancelResult r{it->id, it->price, it->size};
  total_volume_ -= it->size;
  erase_from_index(it->id);
  queue.erase(it);
  if (queue.empty()) book.erase(level);
  return r;
}

std::optional<CancelResult> LimitOrderBook::cancel_order(AgentId owner, Side side, Level level,
                                                         double /*time*/) {
  const auto price = level_price(side, level);
  if (!price) return std::nullopt;
  auto r = side == Side::bid ? cancel_oldest_in(bids_, owner, *price) : cancel_oldest_in(asks_, owner, *price);
  if (r) refresh_quotes();
  return r;
}

std::optional<CancelResult> LimitOrderBook::cancel_by_id(AgentId owner, OrderId id) {
  const auto where = index_.find(id);
  if (where == index_.end()) return std::nullopt;
  const auto [side, price] = where->second;
  auto remove = [&](auto& book) -> std::optional<CancelResult> {
    auto level = book.find(price);
    if (level == book.end()) return std::nullopt;
    auto& queue = level->second;
    auto it = std::find_if(queue.begin(), queue.end(), [id](const Order& o) { return o.id == id; });
    if (it == queue.end() || it->owner != owner) return std::nullopt;
    CancelResult r{it->id, it->price, it->size};
    total_volume_ -= it->size;
    queue.erase(it);
    if (queue.empty()) book.erase(level);
    return r;
  };
  auto r = side == Side::bid ? remove(bids_) : remove(asks_);
  if (r) {
    erase_from_index(id);
    refresh_quotes();
  }
  return r;
}

void LimitOrderBook::refresh_quotes() {
  if (!bids_.empty()) last_bid_ = bids_.begin()->first;
  if (!asks_.empty()) last_ask_ = asks_.begin()->first;
  if (!bids_.empty() && !asks_.empty()) last_mid_ = 0.5 * static_cast<double>(last_bid_ + last_ask_);
}

int LimitOrderBook::volume_at(Side side, Ticks price) const {
  const auto* q = queue_at(side, price);
  if (!q) return 0;
  int v = 0;
  for (const auto& o : *q) v += o.size;
  return v;
}

const std::deque<Order>* LimitOrderBook::queue_at(Side side, Ticks price) const {
  if (side == Side::bid) {
    auto it = bids_.find(price);
    return it == bids_.end() ? nullptr : &it->second;
  }
  auto it = asks_.find(price);
  return it == asks_.end() ? nullptr : &it->second;
}

QuoteState LimitOrderBook::quote_state() const {
  QuoteState q;
  q.best_bid = best(Side::bid);
  q.best_ask = best(Side::ask);
  if (q.best_bid) {
    q.bid_top_size = volume_at(Side::bid, *q.best_bid);
    q.bid_deep_size = volume_at(Side::bid, *q.best_bid - 1);
  }
  if (q.best_ask) {
    q.ask_top_size = volume_at(Side::ask, *q.best_ask);
    q.ask_deep_size = volume_at(Side::ask, *q.best_ask + 1);
  }
  return q;
}

const Order* LimitOrderBook::find(OrderId id) const {
  const auto where = index_.find(id);
  if (where == index_.end()) return nullptr;
  const auto* q = queue_at(where->second.first, where->second.second);
  if (!q) return nullptr;
  for (const auto& o : *q) {
    if (o.id == id) return &o;
  }
  return nullptr;
}

std::vector<Order> LimitOrderBook::orders_of(AgentId owner) const {
  std::vector<Order> out;
  for (const auto& [price, q] : bids_)
    for (const auto& o : q)
      if (o.owner == owner) out.push_back(o);
  for (const auto& [price, q] : asks_)
    for (const auto& o : q)
      if (o.owner == owner) out.push_back(o);
  return out;
}

std::vector<Order> LimitOrderBook::all_orders() const {
  std::vector<Order> out;
  out.reserve(index_.size());
  for (const auto& [price, q] : bids_) out.insert(out.end(), q.begin(), q.end());
  for (const auto& [price, q] : asks_) out.insert(out.end(), q.begin(), q.end());
  return out;
}

std::uint64_t LimitOrderBook::hash() const {
  Fnv1a h;
  for (const auto& o : all_orders()) {
    h.add(static_cast<std::uint64_t>(o.side));
    h.add(static_cast<std::uint64_t>(o.price));
    h.add(o.id);
    h.add(o.owner);
    h.add(static_cast<std::uint64_t>(o.size));
    h.add(std::bit_cast<std::uint64_t>(o.entry_time));
  }
  return h.value();
}

AppliedOperation apply_market_event(LimitOrderBook& book, const hawkes::MarketEvent& event) {
  AppliedOperation r;
  r.side = side_of(event.kind);
  r.op = class_of(event.kind);
  switch (r.op) {
    case EventClass::limit: {
      r.slot = slot_of(event.kind);
      const auto placed = book.submit_limit(kExogenous, r.side, *r.slot, event.size, event.time);
      if (!placed) return r;
      r.applied = true;
      r.price = placed.price;
      r.size = event.size;
      r.order_id = placed.id;
      return r;
    }
    case EventClass::cancel: {
      const Level level = slot_of(event.kind) == Slot::deep ? Level::deep : Level::top;
      r.slot = slot_of(event.kind);
      const auto cancelled = book.cancel_order(kExogenous, r.side, level, event.time);
      if (!cancelled) return r;
      r.applied = true;
      r.price = cancelled->price;
      r.size = cancelled->size;
      r.order_id = cancelled->id;
      return r;
    }
    case EventClass::market: {
      r.size = event.size;
      r.fills = book.submit_market(kExogenous, direction_hitting(r.side), event.size, event.time);
      r.applied = !r.fills.empty();
      if (r.applied) r.price = r.fills.front().price;
      return r;
    }
  }
  return r;
}

}  // namespace hlob
