// Market statistics of an exogenous-only flow, used to tune a Hawkes parameter file.
#include <cmath>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hlob/agent_api.hpp"
#include "hlob/event_log.hpp"
#include "hlob/hawkes.hpp"
#include "hlob/stat_tests.hpp"

namespace {

struct Episode {
  double mo_volume_per_s = 0.0;
  double mean_spread = 0.0;
  double mean_depth = 0.0;  // units within 3 ticks of the best, per side
  double seeds = 0.0;
  double dropped = 0.0;
  double abs_mid_move = 0.0;  // ticks, first to last sample
  double mid_move = 0.0;
};

Episode run(const hlob::hawkes::HawkesParams& params, const hlob::ExchangeConfig& ex_cfg, double warmup,
            double seconds, std::uint64_t seed) {
  using namespace hlob;
  EventLog log(ex_cfg.initial_mid, ex_cfg.tick_size, nullptr);
  Exchange ex(ex_cfg, params, &log);
  ex.seed_initial_book(0.0);
  Rng rng(derive_seed(seed, 1));
  const double t_end = warmup + seconds;
  double t = 0.0;
  double next_sample = warmup;
  long long mo_start = 0;
  std::uint64_t seeds_start = 0;
  std::uint64_t dropped_start = 0;
  std::vector<double> spreads;
  std::vector<double> depths;
  std::vector<double> mids;
  auto sample = [&] {
    const auto& b = ex.book();
    const auto bid = b.best(Side::bid);
    const auto ask = b.best(Side::ask);
    if (bid && ask) spreads.push_back(static_cast<double>(*ask - *bid));
    double d = 0.0;
    for (int k = 0; k < 3; ++k) {
      if (bid) d += b.volume_at(Side::bid, *bid - k);
      if (ask) d += b.volume_at(Side::ask, *ask + k);
    }
    depths.push_back(d / 2.0);
    mids.push_back(ex.mid());
  };
  while (true) {
    const auto c = hawkes::propose_next_event(params, ex.history(), t, rng, t_end);
    const double tc = c ? c->time : t_end;
    while (next_sample <= tc && next_sample <= t_end) {
      if (next_sample == warmup) {
        mo_start = ex.counters().exogenous_mo_volume;
        seeds_start = ex.counters().seeds;
        dropped_start = ex.counters().exogenous_dropped;
      }
      sample();
      next_sample += 1.0;
    }
    if (!c) break;
    ex.apply_exogenous({c->time, c->kind, hawkes::sample_order_size(params, c->kind, rng)});
    t = c->time;
  }
  Episode e;
  e.mo_volume_per_s = static_cast<double>(ex.counters().exogenous_mo_volume - mo_start) / seconds;
  e.mean_spread = stats::summarize(spreads).mean;
  e.mean_depth = stats::summarize(depths).mean;
  e.seeds = static_cast<double>(ex.counters().seeds - seeds_start);
  e.dropped = static_cast<double>(ex.counters().exogenous_dropped - dropped_start);
  e.mid_move = mids.back() - mids.front();
  e.abs_mid_move = std::abs(e.mid_move);
  return e;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Market statistics of a Hawkes parameter file"};
  std::string path;
  double scale = 1.0;
  double seconds = 300.0;
  double warmup = 100.0;
  int seeds = 20;
  app.add_option("--params", path, "Hawkes parameter JSON")->required();
  app.add_option("--scale", scale, "Baseline volume scale");
  app.add_option("--seconds", seconds, "Measured seconds per episode");
  app.add_option("--warmup", warmup, "Warm-up seconds");
  app.add_option("--seeds", seeds, "Episodes");
  CLI11_PARSE(app, argc, argv);
  try {
    auto params = hlob::hawkes::HawkesParams::load(path);
    params.volume_scale = scale;
    params.validate();
    const auto st = hlob::hawkes::stationarity_check(params);
    const auto rates = hlob::hawkes::stationary_rates(params);
    double mo = 0.0;
    for (const auto k : {hlob::EventKind::mo_bid, hlob::EventKind::mo_ask}) {
      mo += rates[hlob::index_of(k)] * params.size_mean[hlob::index_of(k)];
    }
    std::cout << "spectral radius " << st.spectral_radius << "\nstationary MO volume/s " << mo << '\n';
    std::cout << "stationary rates:";
    for (const double r : rates) std::cout << ' ' << r;
    std::cout << '\n';
    std::vector<double> v, spread, depth, seeded, dropped, move, abs_move;
    for (int s = 1; s <= seeds; ++s) {
      const auto e = run(params, hlob::ExchangeConfig{}, warmup, seconds, static_cast<std::uint64_t>(s));
      v.push_back(e.mo_volume_per_s);
      spread.push_back(e.mean_spread);
      depth.push_back(e.mean_depth);
      seeded.push_back(e.seeds);
      dropped.push_back(e.dropped);
      move.push_back(e.mid_move);
      abs_move.push_back(e.abs_mid_move);
    }
    auto show = [](const char* name, const std::vector<double>& x) {
      const auto s = hlob::stats::summarize(x);
      std::cout << name << ": mean " << s.mean << " sd " << s.stddev << '\n';
    };
    show("MO volume/s", v);
    show("spread (ticks)", spread);
    show("depth within 3 ticks per side", depth);
    show("seed orders", seeded);
    show("dropped events", dropped);
    show("mid move (ticks)", move);
    show("|mid move| (ticks)", abs_move);
  } catch (const std::exception& e) {
    std::cerr << "error[config]: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
