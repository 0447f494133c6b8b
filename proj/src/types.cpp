#include "hlob/types.hpp"

namespace hlob {

namespace {

constexpr std::array<std::string_view, kNumEventKinds> kKindNames = {
    "lo_deep_bid", "lo_top_bid", "lo_inspread_bid", "co_deep_bid", "co_top_bid", "mo_bid",
    "lo_deep_ask", "lo_top_ask", "lo_inspread_ask", "co_deep_ask", "co_top_ask", "mo_ask",
};

std::size_t side_offset(Side s) { return s == Side::bid ? 0 : 6; }

}  // namespace

EventKind limit_kind(Side side, Slot slot) {
  const std::size_t base = side_offset(side);
  switch (slot) {
    case Slot::deep:
      return static_cast<EventKind>(base + 0);
    case Slot::top:
      return static_cast<EventKind>(base + 1);
    case Slot::inspread:
      return static_cast<EventKind>(base + 2);
  }
  throw ContractViolation("bad slot");
}

EventKind cancel_kind(Side side, Level level) {
  return static_cast<EventKind>(side_offset(side) + (level == Level::deep ? 3 : 4));
}

EventKind market_kind(Side hit) { return static_cast<EventKind>(side_offset(hit) + 5); }

std::string_view to_string(EventKind k) { return kKindNames[index_of(k)]; }

std::string_view to_string(Side s) { return s == Side::bid ? "bid" : "ask"; }

std::string_view to_string(Direction d) { return d == Direction::buy ? "buy" : "sell"; }

std::string_view to_string(Slot s) {
  switch (s) {
    case Slot::deep:
      return "deep";
    case Slot::top:
      return "top";
    case Slot::inspread:
      return "inspread";
  }
  return "?";
}

std::string_view to_string(Level l) { return l == Level::deep ? "deep" : "top"; }

EventKind parse_event_kind(std::string_view name) {
  for (std::size_t i = 0; i < kNumEventKinds; ++i) {
    if (kKindNames[i] == name) return static_cast<EventKind>(i);
  }
  throw ConfigError("unknown event kind '" + std::string(name) + "'");
}

Side parse_side(std::string_view name) {
  if (name == "bid") return Side::bid;
  if (name == "ask") return Side::ask;
  throw ConfigError("unknown side '" + std::string(name) + "'");
}

Direction parse_direction(std::string_view name) {
  if (name == "buy") return Direction::buy;
  if (name == "sell") return Direction::sell;
  throw ConfigError("unknown direction '" + std::string(name) + "'");
}

Slot parse_slot(std::string_view name) {
  if (name == "deep") return Slot::deep;
  if (name == "top") return Slot::top;
  if (name == "inspread") return Slot::inspread;
  throw ConfigError("unknown slot '" + std::string(name) + "'");
}

}  // namespace hlob
