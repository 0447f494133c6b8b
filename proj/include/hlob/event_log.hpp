#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hlob/lob.hpp"

namespace hlob {

/// One applied book operation. Serialized as one JSON object per line:
///
///   {"seq", "time", "actor", "kind", "op", "side", "slot", "price_ticks",
///    "size", "order_id", "fills": [{"price_ticks", "size", "maker", "maker_order"}]}
///
/// `side` is the book side touched: for market records it is the side hit, so
/// a record with kind "mo_bid" is a sell. `actor` is the owner id (0 = exogenous
/// flow). Seeding orders carry kind "seed".
struct LogRecord {
  std::uint64_t seq = 0;
  double time = 0.0;
  AgentId actor = kExogenous;
  std::string kind;
  EventClass op = EventClass::limit;
  Side side = Side::bid;
  std::optional<Slot> slot;
  Ticks price = 0;
  int size = 0;
  OrderId order_id = 0;
  std::vector<Fill> fills;
};

nlohmann::json to_json(const LogRecord& r);
LogRecord record_from_json(const nlohmann::json& j);

LogRecord make_record(const AppliedOperation& op, double time, AgentId actor, std::string kind);

/// Append-only line-delimited event log with strictly increasing sequence numbers.
class EventLog {
 public:
  EventLog(Ticks initial_mid, double tick_size, std::ostream* sink = nullptr, bool keep = false);

  void append(LogRecord record);

  std::uint64_t size() const { return next_seq_; }
  /// FNV-1a over every serialized line, header included.
  std::uint64_t hash() const { return hash_; }
  const std::vector<LogRecord>& records() const { return records_; }

  /// Marks the log as partial: the episode stopped early. Not part of the hash.
  void write_abort_marker(double time, AgentId agent, const std::string& reason);

 private:
  void write_line(const std::string& line);

  std::ostream* sink_;
  bool keep_;
  std::uint64_t next_seq_ = 0;
  std::uint64_t hash_ = 0xcbf29ce484222325ULL;
  std::vector<LogRecord> records_;
};

struct ReplayResult {
  std::uint64_t records = 0;
  std::uint64_t fill_mismatches = 0;
  std::uint64_t final_hash = 0;
  long long final_volume = 0;
  /// The log ended with an abort marker.
  bool aborted = false;
};

/// Applies a serialized log to a fresh book and checks every recorded fill.
ReplayResult replay_log(std::istream& in);

/// Applies one record to `book` and returns the fills it produced.
std::vector<Fill> apply_record(LimitOrderBook& book, const LogRecord& r);

}  // namespace hlob
