#include <doctest.h>

#include <cmath>

#include "hlob/agent_api.hpp"
#include "hlob/hawkes.hpp"
#include "hlob/rl_agent.hpp"
#include "test_util.hpp"

using namespace hlob;
using namespace hlob::rl;

namespace {

MarketView two_sided_view() {
  MarketView v;
  v.time = 10.0;
  v.quotes.best_bid = 999;
  v.quotes.best_ask = 1001;
  v.quotes.bid_top_size = 4;
  v.quotes.ask_top_size = 2;
  v.mid = 1000.0;
  return v;
}

ObservationContext context(int rho) {
  ObservationContext c;
  c.reference_mid = 1000.0;
  c.start = 0.0;
  c.end = 100.0;
  c.rho = rho;
  return c;
}

}  // namespace

TEST_CASE("rho feature follows the TWAP signal") {
  const auto scales = default_norm_scales();
  const auto v = two_sided_view();
  CHECK(build_observation(v, context(0), scales)[13] == 0.0);
  CHECK(build_observation(v, context(1), scales)[13] == 1.0);
  CHECK(build_observation(v, context(-1), scales)[13] == -1.0);
}

TEST_CASE("observation features") {
  auto v = two_sided_view();
  v.inventory = 4;
  v.own_orders.push_back({1, 2, Side::bid, 999, 3, 1.0});
  v.own_orders.push_back({2, 2, Side::ask, 1003, 1, 1.0});
  const std::vector<double> ones(kObsDim, 1.0);
  const auto x = build_observation(v, context(0), ones);
  REQUIRE(x.size() == static_cast<std::size_t>(kObsDim));
  CHECK(x[0] == 4.0);
  CHECK(x[1] == -1.0);
  CHECK(x[2] == 1.0);
  CHECK(x[3] == 2.0);
  CHECK(x[8] == doctest::Approx((4.0 - 2.0) / 6.0));
  CHECK(x[9] == 3.0);
  CHECK(x[10] == 0.0);
  CHECK(x[11] == 1.0);
  CHECK(x[12] == doctest::Approx(0.1));
}

TEST_CASE("one-sided book falls back to the last two-sided quotes") {
  const auto last = two_sided_view().quotes;
  MarketView v = two_sided_view();
  v.quotes.best_ask.reset();
  bool stale = false;
  const std::vector<double> ones(kObsDim, 1.0);
  const auto x = build_observation(v, context(0), ones, &last, &stale);
  CHECK(stale);
  CHECK(x[2] == 1.0);
  CHECK(x[3] == 2.0);
}

TEST_CASE("inventory cap masks placements") {
  auto v = two_sided_view();
  v.inventory = 19;
  auto m = action_mask(v, 20);
  CHECK(m[static_cast<int>(MmAction::place_bid)]);
  v.own_orders.push_back({1, 2, Side::bid, 999, 1, 1.0});
  m = action_mask(v, 20);
  CHECK_FALSE(m[static_cast<int>(MmAction::place_bid)]);
  CHECK(m[static_cast<int>(MmAction::place_ask)]);
  CHECK(m[static_cast<int>(MmAction::cancel_bid)]);
  CHECK_FALSE(m[static_cast<int>(MmAction::cancel_ask)]);
  CHECK(m[static_cast<int>(MmAction::skip)]);
  v.inventory = -20;
  v.own_orders.clear();
  m = action_mask(v, 20);
  CHECK_FALSE(m[static_cast<int>(MmAction::place_ask)]);
}

TEST_CASE("market maker rewards telescope to the mark-to-market change") {
  auto params = test::flat_poisson(0.3, 1.5);
  EventLog log(1000, 0.01, nullptr);
  Exchange ex(ExchangeConfig{}, params, &log);
  ex.seed_initial_book(0.0);
  PolicyParams policy;
  Rng init(4);
  policy.initialize(init);
  MarketMakerConfig cfg;
  MarketMakerAgent agent(policy, cfg, 99);
  agent.set_end_time(60.0);
  ex.register_agent(2, &agent);
  ex.activate(2, 0.0);
  Rng flow(5);
  double t = 0.0;
  double next_wake = cfg.period;
  while (next_wake <= 60.0) {
    const auto c = hawkes::propose_next_event(params, ex.history(), t, flow, next_wake);
    if (c) {
      ex.apply_exogenous({c->time, c->kind, hawkes::sample_order_size(params, c->kind, flow)});
      t = c->time;
      continue;
    }
    t = next_wake;
    ex.dispatch(2, t, WakeReason::timer);
    next_wake += cfg.period;
  }
  ex.finish(2, 60.0);
  const auto& traj = agent.trajectory();
  REQUIRE(!traj.samples.empty());
  double sum = 0.0;
  for (const auto& s : traj.samples) sum += s.reward;
  CHECK(sum == doctest::Approx(traj.episode_return).epsilon(1e-9));
  CHECK(traj.samples.back().done);
  const auto& acc = ex.account(2);
  CHECK(acc.inventory >= -cfg.inventory_cap);
  CHECK(acc.inventory <= cfg.inventory_cap);
  // Rewards never exceed the raw mark-to-market gain: fees and intervention costs only subtract.
  const double mtm = acc.mark_to_market(ex.mid()) * 0.01;
  CHECK(traj.episode_return <= mtm + 1e-9);
  CHECK(agent.interventions() > 0);
}
