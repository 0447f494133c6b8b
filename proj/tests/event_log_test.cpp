#include <doctest.h>

#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hlob/event_log.hpp"
#include "hlob/lob.hpp"

using namespace hlob;

namespace {

std::vector<nlohmann::json> lines_of(const std::string& text) {
  std::vector<nlohmann::json> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(nlohmann::json::parse(line));
  }
  return out;
}

/// A short trace with a seed, a limit, a cancel and a market order.
std::string sample_log(bool abort_at_end) {
  std::ostringstream sink;
  LimitOrderBook book(1000);
  EventLog log(1000, 0.01, &sink);
  auto place = [&](AgentId owner, Side side, Ticks price, int size, double t, const std::string& kind) {
    const auto r = book.submit_limit_at(owner, side, price, size, t);
    REQUIRE(r);
    AppliedOperation op;
    op.applied = true;
    op.side = side;
    op.price = price;
    op.size = size;
    op.order_id = r.id;
    log.append(make_record(op, t, owner, kind));
    return r.id;
  };
  place(kExogenous, Side::bid, 999, 2, 0.0, "seed");
  place(kExogenous, Side::ask, 1001, 2, 0.0, "seed");
  const auto mine = place(3, Side::bid, 999, 1, 0.5, "lo_top_bid");
  {
    const auto c = book.cancel_by_id(3, mine);
    REQUIRE(c);
    AppliedOperation op;
    op.applied = true;
    op.op = EventClass::cancel;
    op.side = Side::bid;
    op.price = c->price;
    op.size = c->size;
    op.order_id = c->id;
    log.append(make_record(op, 0.7, 3, "co_top_bid"));
  }
  {
    AppliedOperation op;
    op.op = EventClass::market;
    op.side = Side::ask;
    op.size = 3;
    op.fills = book.submit_market(kExogenous, Direction::buy, 3, 1.0);
    op.applied = true;
    op.price = op.fills.front().price;
    log.append(make_record(op, 1.0, kExogenous, "mo_ask"));
  }
  if (abort_at_end) log.write_abort_marker(1.5, 3, "agent raised");
  return sink.str();
}

}  // namespace

TEST_CASE("log starts with a header and sequence numbers increase strictly") {
  const auto lines = lines_of(sample_log(false));
  REQUIRE(lines.size() == 6);
  CHECK(lines[0].contains("header"));
  CHECK(lines[0]["header"]["initial_mid_ticks"] == 1000);
  for (std::size_t k = 1; k < lines.size(); ++k) CHECK(lines[k]["seq"].get<std::uint64_t>() == k - 1);
  for (const char* field : {"seq", "time", "actor", "kind", "op", "side", "slot", "price_ticks", "size", "order_id",
                            "fills"}) {
    CHECK(lines[5].contains(field));
  }
  CHECK(lines[5]["kind"] == "mo_ask");
  CHECK(lines[5]["fills"].size() == 1);
  CHECK(lines[5]["fills"][0]["size"] == 2);
}

TEST_CASE("records survive a json round trip") {
  for (const auto& j : lines_of(sample_log(false))) {
    if (j.contains("header")) continue;
    const auto r = record_from_json(j);
    CHECK(to_json(r) == j);
  }
}

TEST_CASE("replay reproduces fills and the final book") {
  const auto text = sample_log(false);
  std::istringstream in(text);
  const auto r = replay_log(in);
  CHECK(r.records == 5);
  CHECK(r.fill_mismatches == 0);
  CHECK_FALSE(r.aborted);
  CHECK(r.final_volume == 2);
}

TEST_CASE("abort marker flags a partial log") {
  const auto text = sample_log(true);
  const auto lines = lines_of(text);
  CHECK(lines.back().contains("abort"));
  std::istringstream in(text);
  const auto r = replay_log(in);
  CHECK(r.aborted);
  CHECK(r.records == 5);
}

TEST_CASE("tampered fills are detected") {
  auto text = sample_log(false);
  const auto pos = text.rfind("\"size\":2");
  REQUIRE(pos != std::string::npos);
  text.replace(pos, 8, "\"size\":1");
  std::istringstream in(text);
  CHECK(replay_log(in).fill_mismatches > 0);
}

TEST_CASE("a limit record that does not reproduce is refused") {
  auto lines = lines_of(sample_log(false));
  lines[3]["order_id"] = 99;
  std::string text;
  for (const auto& j : lines) text += j.dump() + "\n";
  std::istringstream in(text);
  CHECK_THROWS_AS(replay_log(in), ConfigError);
}

TEST_CASE("log hash is a function of the content") {
  std::ostringstream a_sink;
  std::ostringstream b_sink;
  EventLog a(1000, 0.01, &a_sink);
  EventLog b(1000, 0.01, &b_sink);
  CHECK(a.hash() == b.hash());
  LogRecord r;
  r.kind = "lo_top_bid";
  r.price = 999;
  r.size = 1;
  r.order_id = 1;
  a.append(r);
  r.size = 2;
  b.append(r);
  CHECK(a.hash() != b.hash());
  CHECK(a.size() == 1);
}
