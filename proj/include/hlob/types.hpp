#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace hlob {

using Ticks = std::int64_t;
using OrderId = std::uint64_t;
using AgentId = std::uint32_t;

/// Owner tag of every order that originates from the Hawkes flow (including book seeding).
inline constexpr AgentId kExogenous = 0;

enum class Side : std::uint8_t { bid, ask };
enum class Direction : std::uint8_t { buy, sell };
enum class Slot : std::uint8_t { deep, top, inspread };
enum class Level : std::uint8_t { deep, top };
enum class EventClass : std::uint8_t { limit, cancel, market };

/// The twelve order-flow event types. For market orders the side names the
/// book side being hit, so `mo_bid` is a sell and `mo_ask` is a buy.
enum class EventKind : std::uint8_t {
  lo_deep_bid,
  lo_top_bid,
  lo_inspread_bid,
  co_deep_bid,
  co_top_bid,
  mo_bid,
  lo_deep_ask,
  lo_top_ask,
  lo_inspread_ask,
  co_deep_ask,
  co_top_ask,
  mo_ask,
};

inline constexpr std::size_t kNumEventKinds = 12;

inline constexpr std::array<EventKind, kNumEventKinds> kAllEventKinds = {
    EventKind::lo_deep_bid, EventKind::lo_top_bid, EventKind::lo_inspread_bid,
    EventKind::co_deep_bid, EventKind::co_top_bid, EventKind::mo_bid,
    EventKind::lo_deep_ask, EventKind::lo_top_ask, EventKind::lo_inspread_ask,
    EventKind::co_deep_ask, EventKind::co_top_ask, EventKind::mo_ask,
};

/// Thrown for malformed parameters or scenario files.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Thrown when a caller breaks an operation's precondition.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

constexpr std::size_t index_of(EventKind k) { return static_cast<std::size_t>(k); }

constexpr Side side_of(EventKind k) { return index_of(k) < 6 ? Side::bid : Side::ask; }

constexpr EventClass class_of(EventKind k) {
  switch (index_of(k) % 6) {
    case 0:
    case 1:
    case 2:
      return EventClass::limit;
    case 3:
    case 4:
      return EventClass::cancel;
    default:
      return EventClass::market;
  }
}

/// Slot of a limit event; level of a cancel event (deep/top). Undefined for market orders.
constexpr Slot slot_of(EventKind k) {
  switch (index_of(k) % 6) {
    case 0:
    case 3:
      return Slot::deep;
    case 2:
      return Slot::inspread;
    default:
      return Slot::top;
  }
}

constexpr Side opposite(Side s) { return s == Side::bid ? Side::ask : Side::bid; }

/// Direction of a market order that hits the given book side.
constexpr Direction direction_hitting(Side hit) {
  return hit == Side::bid ? Direction::sell : Direction::buy;
}

/// Book side a market order of the given direction consumes.
constexpr Side side_hit_by(Direction d) { return d == Direction::buy ? Side::ask : Side::bid; }

/// Book side on which a participant trading in direction `d` rests passive orders.
constexpr Side passive_side(Direction d) { return d == Direction::buy ? Side::bid : Side::ask; }

constexpr int sign_of(Direction d) { return d == Direction::buy ? 1 : -1; }

EventKind limit_kind(Side side, Slot slot);
EventKind cancel_kind(Side side, Level level);
EventKind market_kind(Side hit);

std::string_view to_string(EventKind k);
std::string_view to_string(Side s);
std::string_view to_string(Direction d);
std::string_view to_string(Slot s);
std::string_view to_string(Level l);

EventKind parse_event_kind(std::string_view name);
Side parse_side(std::string_view name);
Direction parse_direction(std::string_view name);
Slot parse_slot(std::string_view name);

}  // namespace hlob
