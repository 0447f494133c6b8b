#include "hlob/event_log.hpp"

#include <istream>
#include <ostream>

namespace hlob {

namespace {

std::string_view op_name(EventClass c) {
  switch (c) {
    case EventClass::limit:
      return "limit";
    case EventClass::cancel:
      return "cancel";
    case EventClass::market:
      return "market";
  }
  return "?";
}

EventClass parse_op(const std::string& s) {
  if (s == "limit") return EventClass::limit;
  if (s == "cancel") return EventClass::cancel;
  if (s == "market") return EventClass::market;
  throw ConfigError("event log: unknown op '" + s + "'");
}

bool same_fill(const Fill& a, const Fill& b) {
  return a.price == b.price && a.size == b.size && a.maker == b.maker && a.maker_order == b.maker_order;
}

}  // namespace

nlohmann::json to_json(const LogRecord& r) {
  nlohmann::json j;
  j["seq"] = r.seq;
  j["time"] = r.time;
  j["actor"] = r.actor;
  j["kind"] = r.kind;
  j["op"] = op_name(r.op);
  j["side"] = to_string(r.side);
  j["slot"] = r.slot ? nlohmann::json(to_string(*r.slot)) : nlohmann::json(nullptr);
  j["price_ticks"] = r.price;
  j["size"] = r.size;
  j["order_id"] = r.order_id;
  auto fills = nlohmann::json::array();
  for (const auto& f : r.fills) {
    fills.push_back({{"price_ticks", f.price}, {"size", f.size}, {"maker", f.maker}, {"maker_order", f.maker_order}});
  }
  j["fills"] = std::move(fills);
  return j;
}

LogRecord record_from_json(const nlohmann::json& j) {
  LogRecord r;
  r.seq = j.at("seq").get<std::uint64_t>();
  r.time = j.at("time").get<double>();
  r.actor = j.at("actor").get<AgentId>();
  r.kind = j.at("kind").get<std::string>();
  r.op = parse_op(j.at("op").get<std::string>());
  r.side = parse_side(j.at("side").get<std::string>());
  if (!j.at("slot").is_null()) r.slot = parse_slot(j.at("slot").get<std::string>());
  r.price = j.at("price_ticks").get<Ticks>();
  r.size = j.at("size").get<int>();
  r.order_id = j.at("order_id").get<OrderId>();
  const Direction dir = direction_hitting(r.side);
  for (const auto& f : j.at("fills")) {
    Fill fill;
    fill.taker = r.actor;
    fill.maker = f.at("maker").get<AgentId>();
    fill.maker_order = f.at("maker_order").get<OrderId>();
    fill.taker_direction = dir;
    fill.price = f.at("price_ticks").get<Ticks>();
    fill.size = f.at("size").get<int>();
    fill.time = r.time;
    r.fills.push_back(fill);
  }
  return r;
}

LogRecord make_record(const AppliedOperation& op, double time, AgentId actor, std::string kind) {
  LogRecord r;
  r.time = time;
  r.actor = actor;
  r.kind = std::move(kind);
  r.op = op.op;
  r.side = op.side;
  r.slot = op.slot;
  r.price = op.price;
  r.size = op.size;
  r.order_id = op.order_id;
  r.fills = op.fills;
  return r;
}

EventLog::EventLog(Ticks initial_mid, double tick_size, std::ostream* sink, bool keep)
    : sink_(sink), keep_(keep) {
  nlohmann::json header{{"header", {{"format", "hlob-event-log"}, {"version", 1},
                                    {"initial_mid_ticks", initial_mid}, {"tick_size", tick_size}}}};
  write_line(header.dump());
}

void EventLog::write_line(const std::string& line) {
  for (const unsigned char c : line) {
    hash_ ^= c;
    hash_ *= 0x100000001b3ULL;
  }
  hash_ ^= static_cast<unsigned char>('\n');
  hash_ *= 0x100000001b3ULL;
  if (sink_) *sink_ << line << '\n';
}

void EventLog::write_abort_marker(double time, AgentId agent, const std::string& reason) {
  if (!sink_) return;
  const nlohmann::json j = {{"abort", {{"time", time}, {"agent", agent}, {"reason", reason}, {"records", next_seq_}}}};
  *sink_ << j.dump() << '\n';
  sink_->flush();
}

void EventLog::append(LogRecord record) {
  record.seq = next_seq_++;
  write_line(to_json(record).dump());
  if (keep_) records_.push_back(std::move(record));
}

std::vector<Fill> apply_record(LimitOrderBook& book, const LogRecord& r) {
  switch (r.op) {
    case EventClass::limit: {
      const auto placed = book.submit_limit_at(r.actor, r.side, r.price, r.size, r.time);
      if (!placed || placed.id != r.order_id) {
        throw ConfigError("event log replay: limit record " + std::to_string(r.seq) + " does not reproduce");
      }
      return {};
    }
    case EventClass::cancel: {
      const auto cancelled = book.cancel_by_id(r.actor, r.order_id);
      if (!cancelled || cancelled->size != r.size) {
        throw ConfigError("event log replay: cancel record " + std::to_string(r.seq) + " does not reproduce");
      }
      return {};
    }
    case EventClass::market:
      return book.submit_market(r.actor, direction_hitting(r.side), r.size, r.time);
  }
  return {};
}

ReplayResult replay_log(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("event log replay: empty log");
  const auto header = nlohmann::json::parse(line).at("header");
  LimitOrderBook book(header.at("initial_mid_ticks").get<Ticks>(), header.at("tick_size").get<double>());
  ReplayResult result;
  std::uint64_t expected_seq = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    if (j.contains("abort")) {
      result.aborted = true;
      break;
    }
    const LogRecord r = record_from_json(j);
    if (r.seq != expected_seq++) throw ConfigError("event log replay: sequence gap");
    const auto fills = apply_record(book, r);
    if (fills.size() != r.fills.size()) {
      ++result.fill_mismatches;
    } else {
      for (std::size_t i = 0; i < fills.size(); ++i) {
        if (!same_fill(fills[i], r.fills[i])) ++result.fill_mismatches;
      }
    }
    ++result.records;
  }
  result.final_hash = book.hash();
  result.final_volume = book.total_volume();
  return result;
}

}  // namespace hlob
