#include "hlob/runner.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <memory>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "hlob/event_log.hpp"
#include "hlob/rl_agent.hpp"

namespace hlob {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kGridEps = 1e-9;

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : "NA"; }

std::string hex64(std::uint64_t h) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::ios_base::failure("cannot create directory " + dir.string() + ": " + ec.message());
}

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) ensure_dir(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::ios_base::failure("cannot open " + path.string() + " for writing");
  return out;
}

void close_checked(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw std::ios_base::failure("write failed for " + path.string() + " (file is partial)");
}

std::optional<double> mean_of(const std::vector<double>& v) {
  if (v.empty()) return std::nullopt;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

// ---------------------------------------------------------------------------
// Episodes

EpisodeSetup make_episode_setup(const ScenarioConfig& config, std::uint64_t seed, int index, bool fixed_start) {
  EpisodeSetup s;
  s.index = index;
  s.seed = seed;
  Rng rng(derive_seed(seed, 3));
  if (config.twap) {
    std::optional<Direction> side = config.twap->config.side;
    if (config.twap->side_mix) side = config.twap->side_mix->draw(rng);
    if (side) {
      TwapConfig t = config.twap->config;
      t.side = *side;
      t.start_time = fixed_start ? config.evaluation.twap_start : config.twap->start.draw(rng, 0.0, config.trading);
      s.twap = t;
    }
  }
  if (config.rl) {
    s.rl = true;
    s.rl_start = config.rl->start;
  }
  return s;
}

EpisodeStats run_episode(const ScenarioConfig& config, const hawkes::HawkesParams& params, const EpisodeSetup& setup,
                         const rl::PolicyParams* policy, const EpisodeOptions& options) {
  if (setup.rl && !policy) throw ContractViolation("run_episode: an RL agent needs a policy");
  EpisodeStats st;
  st.scenario = config.name;
  st.episode = setup.index;
  st.seed = setup.seed;
  const double warmup = config.warmup;
  const double t_end = warmup + config.trading;
  const double tick = config.exchange.tick_size;
  st.warmup_end = warmup;
  st.end = t_end;

  EventLog log(config.exchange.initial_mid, tick, options.log_sink);
  Exchange ex(config.exchange, params, &log);
  Rng flow(derive_seed(setup.seed, 1));
  WakeScheduler sched;

  std::unique_ptr<TwapAgent> twap;
  std::unique_ptr<rl::MarketMakerAgent> mm;
  struct Activation {
    double time;
    AgentId id;
  };
  std::vector<Activation> activations;
  std::array<bool, 3> active{};

  double twap_start = kInf;
  double twap_end = kInf;
  if (setup.twap) {
    twap = std::make_unique<TwapAgent>(*setup.twap);
    ex.register_agent(kTwapAgentId, twap.get());
    twap_start = warmup + setup.twap->start_time;
    twap_end = std::min(twap_start + setup.twap->horizon, t_end);
    sched.add({kTwapAgentId, twap_start, setup.twap->period, twap_end, false});
    activations.push_back({twap_start, kTwapAgentId});
    st.has_twap = true;
    st.twap_side = setup.twap->side;
    st.twap_start = twap_start;
    st.twap_end = twap_end;
    st.twap_quantity = setup.twap->quantity;
    st.twap_horizon = setup.twap->horizon;
  }
  const bool frl = config.rl && config.rl->mode == RlMode::frl;
  const int twap_sign = setup.twap ? sign_of(setup.twap->side) : 0;
  auto rho_at = [&](double t) { return (frl && t >= twap_start && t < twap_end) ? twap_sign : 0; };
  double rl_start = kInf;
  if (setup.rl) {
    mm = std::make_unique<rl::MarketMakerAgent>(*policy, config.rl->agent, derive_seed(setup.seed, 2));
    ex.register_agent(kRlAgentId, mm.get());
    rl_start = warmup + setup.rl_start;
    sched.add({kRlAgentId, rl_start, config.rl->agent.period, t_end, true});
    activations.push_back({rl_start, kRlAgentId});
    mm->set_end_time(t_end);
    if (frl) mm->set_rho_source(rho_at);
    st.has_rl = true;
    st.rl_start = rl_start;
  }
  std::stable_sort(activations.begin(), activations.end(), [](const Activation& a, const Activation& b) {
    return a.time < b.time || (a.time == b.time && a.id < b.id);
  });

  const auto n_samples = static_cast<std::size_t>(std::floor(config.trading / config.sample_interval + kGridEps));
  auto sample_time = [&](std::size_t k) { return warmup + static_cast<double>(k) * config.sample_interval; };
  long long mo_volume_at_start = 0;

  auto record_sample = [&](double t) {
    SamplePoint p;
    p.time = t;
    p.mid = ex.mid();
    if (mm) {
      p.rl_mtm = ex.account(kRlAgentId).mark_to_market(p.mid) * tick;
      p.rl_inventory = ex.account(kRlAgentId).inventory;
    }
    if (twap) p.twap_executed = twap->state().executed;
    p.rho = setup.twap ? ((t >= twap_start && t < twap_end) ? twap_sign : 0) : 0;
    st.samples.push_back(p);
  };

  // Event-driven wakes for every subscribed agent except the actor; actions
  // taken inside them do not trigger further wakes.
  auto event_wakes = [&](const OperationOutcome& o, double t, AgentId actor) {
    bool registered = false;
    if (!o.observed.triggers()) return registered;
    for (const AgentId id : {kTwapAgentId, kRlAgentId}) {
      if (id == actor || !active[id] || !sched.subscribed(id, t)) continue;
      registered |= ex.dispatch(id, t, o.observed.reason()).registered;
    }
    return registered;
  };

  double now = 0.0;
  try {
    ex.seed_initial_book(0.0);
    auto candidate = hawkes::propose_next_event(params, ex.history(), 0.0, flow, t_end);
    std::size_t k = 0;
    std::size_t next_act = 0;
    while (true) {
      const double ts = k <= n_samples ? sample_time(k) : kInf;
      const double ta = next_act < activations.size() ? activations[next_act].time : kInf;
      const double tw = sched.next_time();
      const double tc = candidate ? candidate->time : kInf;
      const double t_other = std::min({ta, tw, tc});
      if (ts == kInf && t_other == kInf) break;
      // At equal times the sample sees the book after everything at that instant.
      if (ts < t_other) {
        if (k == 0) mo_volume_at_start = ex.counters().exogenous_mo_volume;
        record_sample(ts);
        ++k;
        continue;
      }
      now = t_other;
      if (ta <= tw && ta <= tc) {
        const AgentId id = activations[next_act++].id;
        ex.activate(id, ta);
        active[id] = true;
        continue;
      }
      if (tw <= tc) {
        bool registered = false;
        for (const AgentId id : sched.pop_due()) {
          if (!active[id]) continue;
          const auto o = ex.dispatch(id, tw, WakeReason::timer);
          registered |= o.registered;
          registered |= event_wakes(o, tw, id);
        }
        if (registered) candidate = hawkes::propose_next_event(params, ex.history(), tw, flow, t_end);
        continue;
      }
      const hawkes::MarketEvent ev{candidate->time, candidate->kind,
                                   hawkes::sample_order_size(params, candidate->kind, flow)};
      const auto o = ex.apply_exogenous(ev);
      event_wakes(o, ev.time, kExogenous);
      candidate = hawkes::propose_next_event(params, ex.history(), ev.time, flow, t_end);
    }
    now = t_end;
    for (const AgentId id : {kTwapAgentId, kRlAgentId}) {
      if (active[id]) ex.finish(id, t_end);
    }
  } catch (const EpisodeAborted& e) {
    st.aborted = true;
    st.abort_reason = e.what();
    log.write_abort_marker(now, e.agent, e.what());
  }

  st.counters = ex.counters();
  st.exogenous_mo_volume = st.counters.exogenous_mo_volume - mo_volume_at_start;
  st.volume_per_second = static_cast<double>(st.exogenous_mo_volume) / config.trading;
  st.log_hash = log.hash();
  st.log_records = log.size();
  st.final_book_hash = ex.book().hash();

  if (twap) {
    const auto& rec = twap->record();
    const auto& tcfg = twap->config();
    st.executed = twap->state().executed;
    st.completed = st.executed == tcfg.quantity;
    st.arrival_mid = rec.arrival_mid;
    st.average_price = twap->average_price();
    st.twap_wakes = rec.wakes;
    st.limit_children = rec.limit_children;
    st.market_children = rec.market_children;
    st.max_schedule_gap = rec.max_schedule_gap;
    st.twap_downgraded = ex.account(kTwapAgentId).downgraded;
    const auto& acc = ex.account(kTwapAgentId);
    st.side_pure = tcfg.side == Direction::buy ? acc.sold == 0 : acc.bought == 0;
    if (rec.wakes > 0) st.mean_child_size = static_cast<double>(st.executed) / rec.wakes;
    const int orders = rec.limit_children + rec.market_children;
    if (orders > 0) {
      st.mean_order_size = static_cast<double>(rec.limit_child_units + rec.market_child_units) / orders;
    }
    if (rec.filled > 0 && rec.arrival_mid > 0.0) {
      st.slippage_bps = metrics::slippage_target_arrival({{st.average_price, static_cast<double>(rec.filled)}},
                                                         rec.arrival_mid, tcfg.side);
    }
    st.pov_pct = metrics::participation_rate(tcfg.quantity / tcfg.horizon, st.volume_per_second);

    const double sign = sign_of(tcfg.side);
    const bool full_horizon = std::abs(twap_end - (twap_start + tcfg.horizon)) < kGridEps;
    if (rec.arrival_mid > 0.0) {
      for (const auto& p : st.samples) {
        if (p.time <= twap_start + kGridEps) continue;
        const double impact = sign * (p.mid - rec.arrival_mid) / rec.arrival_mid;
        if (p.time <= twap_end + kGridEps) st.impact_curve.push_back({static_cast<double>(p.twap_executed), impact});
        if (full_horizon && p.time >= twap_end - kGridEps) {
          st.decay_path.push_back({(p.time - twap_start) / tcfg.horizon, impact});
        }
      }
    }
    const auto binned = metrics::bin_impact_curve({st.impact_curve}, tcfg.quantity, 10);
    if (const auto fit = metrics::fit_impact_exponent(binned); fit.ok) st.sql_delta = fit.exponent;
    if (const auto norm = metrics::normalize_decay({st.decay_path})) {
      if (const auto fit = metrics::fit_decay_beta(*norm); fit.ok) st.beta = fit.beta;
    }
  }

  if (mm) {
    st.rl_return = mm->episode_return();
    st.interventions = mm->interventions();
    st.stale_observations = mm->stale_observations();
    st.rl_downgraded = ex.account(kRlAgentId).downgraded;
    st.final_inventory = ex.account(kRlAgentId).inventory;
    for (const auto& [t, r] : mm->reward_times()) {
      if (t < twap_start) {
        st.return_before += r;
      } else if (t <= twap_end) {
        st.return_during += r;
      }
    }
    std::vector<double> before;
    std::vector<double> during;
    for (std::size_t i = 0; i + 1 < st.samples.size(); ++i) {
      const auto& a = st.samples[i];
      const auto& b = st.samples[i + 1];
      if (a.time < rl_start - kGridEps) continue;
      const double inc = b.rl_mtm - a.rl_mtm;
      if (b.time <= twap_start + kGridEps) {
        before.push_back(inc);
      } else if (a.time >= twap_start - kGridEps && b.time <= twap_end + kGridEps) {
        during.push_back(inc);
      }
    }
    st.before_increments = before.size();
    st.during_increments = during.size();
    st.sharpe_before = metrics::sharpe_ratio(before, config.sample_interval);
    st.sharpe_during = metrics::sharpe_ratio(during, config.sample_interval);
    if (options.keep_trajectory) st.trajectory = mm->take_trajectory();
  }
  return st;
}

// ---------------------------------------------------------------------------
// Scenarios

void parallel_for(int n, int workers, const std::function<void(int)>& body) {
  if (n <= 0) return;
  workers = std::clamp(workers, 1, n);
  if (workers == 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int i = next++; i < n; i = next++) body(i);
    });
  }
  for (auto& t : pool) t.join();
}

rl::PolicyParams resolve_policy(const ScenarioConfig& config, const std::optional<std::filesystem::path>& checkpoint) {
  if (!config.rl) throw ConfigError("scenario has no RL agent");
  const bool frl = config.rl->mode == RlMode::frl;
  const auto path = checkpoint ? checkpoint : config.rl->checkpoint;
  if (path) {
    auto p = rl::checkpoint_load(*path, rl::Architecture{});
    if (p.rho_aware != frl) {
      throw ConfigError("checkpoint " + path->string() + " was trained " +
                        (p.rho_aware ? "with" : "without") + " the TWAP-presence signal but the scenario mode is " +
                        std::string(to_string(config.rl->mode)));
    }
    return p;
  }
  rl::PolicyParams p;
  Rng rng(config.rl->init_seed);
  p.initialize(rng);
  p.rho_aware = frl;
  return p;
}

ScenarioFits fit_scenario(const std::vector<EpisodeStats>& episodes) {
  ScenarioFits fits;
  std::vector<std::vector<metrics::ImpactPoint>> curves;
  std::vector<std::vector<metrics::DecayPoint>> paths;
  double total = 0.0;
  for (const auto& e : episodes) {
    if (!e.has_twap || e.aborted) continue;
    total = std::max(total, static_cast<double>(e.twap_quantity));
    if (!e.impact_curve.empty()) curves.push_back(e.impact_curve);
    if (!e.decay_path.empty()) paths.push_back(e.decay_path);
  }
  if (!curves.empty() && total > 0.0) {
    fits.binned_impact = metrics::bin_impact_curve(curves, total, 10);
    fits.sql = metrics::fit_impact_exponent(fits.binned_impact);
  }
  if (!paths.empty()) {
    if (auto norm = metrics::normalize_decay(paths)) {
      fits.decay = std::move(*norm);
      fits.beta = metrics::fit_decay_beta(fits.decay);
      fits.has_decay = true;
    }
  }
  return fits;
}

const std::vector<std::string>& stats_columns() {
  static const std::vector<std::string> cols = {"scenario",      "episode",       "seed",    "side",
                                                "slippage_bps",  "sharpe_before", "sharpe_during",
                                                "pov_pct",       "beta",          "sql_delta"};
  return cols;
}

const std::vector<std::string>& stats_extra_columns() {
  static const std::vector<std::string> cols = {
      "agent",         "executed",      "quantity",        "completed",      "mean_child_size",
      "mean_order_size", "rl_return",   "return_before",   "return_during",  "final_inventory",
      "interventions", "volume_per_s",  "downgraded",      "aborted",        "log_hash"};
  return cols;
}

namespace {

std::string side_label(const EpisodeStats& e) { return e.has_twap ? std::string(to_string(e.twap_side)) : "none"; }

}  // namespace

void write_stats(const std::filesystem::path& path, const std::vector<EpisodeStats>& episodes) {
  auto out = open_out(path);
  std::vector<std::string> header = stats_columns();
  header.insert(header.end(), stats_extra_columns().begin(), stats_extra_columns().end());
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "\t" : "") << header[i];
  out << '\n';
  auto row = [&](const EpisodeStats& e, const std::string& agent) {
    const bool tw = agent == "twap";
    const bool rl = agent == "rl";
    out << e.scenario << '\t' << e.episode << '\t' << e.seed << '\t' << side_label(e) << '\t'
        << (tw ? fmt(e.slippage_bps) : "NA") << '\t' << (rl ? fmt(e.sharpe_before) : "NA") << '\t'
        << (rl ? fmt(e.sharpe_during) : "NA") << '\t' << (tw ? fmt(e.pov_pct) : "NA") << '\t'
        << (tw ? fmt(e.beta) : "NA") << '\t' << (tw ? fmt(e.sql_delta) : "NA") << '\t' << agent << '\t'
        << (tw ? std::to_string(e.executed) : "NA") << '\t' << (tw ? std::to_string(e.twap_quantity) : "NA") << '\t'
        << (tw ? (e.completed ? "1" : "0") : "NA") << '\t' << (tw ? fmt(e.mean_child_size) : "NA") << '\t'
        << (tw ? fmt(e.mean_order_size) : "NA") << '\t' << (rl ? fmt(e.rl_return) : "NA") << '\t'
        << (rl ? fmt(e.return_before) : "NA") << '\t' << (rl ? fmt(e.return_during) : "NA") << '\t'
        << (rl ? std::to_string(e.final_inventory) : "NA") << '\t'
        << (rl ? std::to_string(e.interventions) : "NA") << '\t' << fmt(e.volume_per_second) << '\t'
        << (tw ? std::to_string(e.twap_downgraded) : rl ? std::to_string(e.rl_downgraded) : "NA") << '\t'
        << (e.aborted ? "1" : "0") << '\t' << hex64(e.log_hash) << '\n';
  };
  for (const auto& e : episodes) {
    if (e.has_twap) row(e, "twap");
    if (e.has_rl) row(e, "rl");
    if (!e.has_twap && !e.has_rl) row(e, "market");
  }
  close_checked(out, path);
}

void write_summary(const std::filesystem::path& path, const std::string& scenario,
                   const std::vector<EpisodeStats>& episodes, const ScenarioFits& fits) {
  auto out = open_out(path);
  out << "scenario\tagent\tepisodes\tcompleted\tslippage_bps_mean\tslippage_bps_std\tsharpe_before_mean\t"
         "sharpe_during_mean\tpov_pct_mean\tbeta\tsql_delta\tsql_r2\trl_return_mean\trl_return_std\t"
         "volume_per_s_mean\tvolume_per_s_std\n";
  auto collect = [&](auto pick) {
    std::vector<double> v;
    for (const auto& e : episodes) {
      if (e.aborted) continue;
      if (const std::optional<double> x = pick(e)) v.push_back(*x);
    }
    return stats::summarize(v);
  };
  const auto vol = collect([](const EpisodeStats& e) { return std::optional<double>(e.volume_per_second); });
  auto emit = [&](const std::string& agent) {
    const bool tw = agent == "twap";
    const bool rl = agent == "rl";
    std::size_t n = 0;
    std::size_t completed = 0;
    for (const auto& e : episodes) {
      if (e.aborted) continue;
      if ((tw && !e.has_twap) || (rl && !e.has_rl)) continue;
      ++n;
      completed += e.completed ? 1 : 0;
    }
    const auto slip = collect([](const EpisodeStats& e) { return e.slippage_bps; });
    const auto sb = collect([](const EpisodeStats& e) { return e.sharpe_before; });
    const auto sd = collect([](const EpisodeStats& e) { return e.sharpe_during; });
    const auto pov = collect([](const EpisodeStats& e) { return e.pov_pct; });
    const auto ret = collect([](const EpisodeStats& e) {
      return e.has_rl ? std::optional<double>(e.rl_return) : std::nullopt;
    });
    auto opt = [](bool on, const stats::Summary& s, bool sd_col) {
      if (!on || s.n == 0) return std::string("NA");
      return fmt(sd_col ? s.stddev : s.mean);
    };
    out << scenario << '\t' << agent << '\t' << n << '\t' << (tw ? std::to_string(completed) : "NA") << '\t'
        << opt(tw, slip, false) << '\t' << opt(tw, slip, true) << '\t' << opt(rl, sb, false) << '\t'
        << opt(rl, sd, false) << '\t' << opt(tw, pov, false) << '\t'
        << (tw && fits.has_decay && fits.beta.ok ? fmt(fits.beta.beta) : "NA") << '\t'
        << (tw && fits.sql.ok ? fmt(fits.sql.exponent) : "NA") << '\t' << (tw && fits.sql.ok ? fmt(fits.sql.r2) : "NA")
        << '\t' << opt(rl, ret, false) << '\t' << opt(rl, ret, true) << '\t' << opt(true, vol, false) << '\t'
        << opt(true, vol, true) << '\n';
  };
  bool any_twap = false;
  bool any_rl = false;
  for (const auto& e : episodes) {
    any_twap |= e.has_twap;
    any_rl |= e.has_rl;
  }
  if (any_twap) emit("twap");
  if (any_rl) emit("rl");
  if (!any_twap && !any_rl) emit("market");
  close_checked(out, path);
}

void write_fits(const std::filesystem::path& dir, const ScenarioFits& fits) {
  {
    const auto path = dir / "impact_curve.tsv";
    auto out = open_out(path);
    out << "quantity\timpact\n";
    for (const auto& p : fits.binned_impact) out << fmt(p.quantity) << '\t' << fmt(p.impact) << '\n';
    close_checked(out, path);
  }
  {
    const auto path = dir / "decay_path.tsv";
    auto out = open_out(path);
    out << "z\timpact\tfitted\n";
    for (const auto& p : fits.decay) {
      out << fmt(p.z) << '\t' << fmt(p.impact) << '\t'
          << (fits.beta.ok ? fmt(metrics::propagator_decay(p.z, fits.beta.beta)) : "NA") << '\n';
    }
    close_checked(out, path);
  }
  nlohmann::json j;
  j["sql"] = {{"ok", fits.sql.ok},
              {"delta", fits.sql.exponent},
              {"coefficient", fits.sql.coefficient},
              {"r2", fits.sql.r2},
              {"points", fits.sql.points_used}};
  j["decay"] = {{"ok", fits.has_decay && fits.beta.ok},
                {"beta", fits.beta.beta},
                {"rmse", fits.beta.rmse},
                {"points", fits.decay.size()},
                {"reference_beta", 0.168}};
  const auto path = dir / "fits.json";
  auto out = open_out(path);
  out << j.dump(2) << '\n';
  close_checked(out, path);
}

ScenarioResult run_scenario(const ScenarioConfig& config, const RunOptions& options) {
  config.validate();
  const auto params = config.load_hawkes();
  std::optional<rl::PolicyParams> policy;
  if (config.rl) policy = resolve_policy(config, options.checkpoint);
  const bool write = !options.out_dir.empty();
  if (write) ensure_dir(options.out_dir);
  const bool logs = write && config.write_logs;
  if (logs) ensure_dir(options.out_dir / "logs");

  ScenarioResult result;
  const int n = static_cast<int>(config.seeds.size());
  std::vector<std::optional<EpisodeStats>> slots(n);
  std::vector<std::string> errors(n);
  std::mutex progress_mutex;
  parallel_for(n, config.workers, [&](int i) {
    const auto seed = config.seeds[i];
    try {
      const auto setup = make_episode_setup(config, seed, i);
      EpisodeOptions eo;
      std::ofstream log_file;
      std::filesystem::path log_path;
      if (logs) {
        log_path = options.out_dir / "logs" / ("episode_" + std::to_string(i) + "_seed_" + std::to_string(seed) + ".jsonl");
        log_file = open_out(log_path);
        eo.log_sink = &log_file;
      }
      auto st = run_episode(config, params, setup, policy ? &*policy : nullptr, eo);
      if (logs) close_checked(log_file, log_path);
      if (st.aborted) errors[i] = "seed " + std::to_string(seed) + ": aborted: " + st.abort_reason;
      if (options.progress) {
        std::lock_guard<std::mutex> lock(progress_mutex);
        *options.progress << config.name << ": episode " << i + 1 << "/" << n << " seed " << seed
                          << (st.aborted ? " aborted" : " done") << '\n';
      }
      slots[i] = std::move(st);
    } catch (const std::ios_base::failure&) {
      throw;
    } catch (const std::exception& e) {
      errors[i] = "seed " + std::to_string(seed) + ": " + e.what();
    }
  });
  for (int i = 0; i < n; ++i) {
    if (!errors[i].empty()) result.failures.push_back(errors[i]);
    if (slots[i]) result.episodes.push_back(std::move(*slots[i]));
  }
  std::vector<EpisodeStats> completed;
  for (const auto& e : result.episodes) {
    if (!e.aborted) completed.push_back(e);
  }
  result.fits = fit_scenario(completed);

  if (write) {
    const auto stats_path = options.out_dir / "stats.tsv";
    write_stats(stats_path, result.episodes);
    const auto summary_path = options.out_dir / "summary.tsv";
    write_summary(summary_path, config.name, result.episodes, result.fits);
    result.artifacts = {stats_path, summary_path};
    if (config.twap) {
      write_fits(options.out_dir, result.fits);
      result.artifacts.push_back(options.out_dir / "impact_curve.tsv");
      result.artifacts.push_back(options.out_dir / "decay_path.tsv");
      result.artifacts.push_back(options.out_dir / "fits.json");
    }
    nlohmann::json manifest;
    manifest["scenario"] = config.name;
    manifest["config_hash"] = hex64(config.hash());
    manifest["config"] = config.raw;
    manifest["seeds"] = config.seeds;
    manifest["hawkes_params"] = config.hawkes_path.string();
    manifest["volume_scale"] = config.volume_scale;
    if (policy) manifest["policy_hash"] = hex64(rl::params_hash(*policy));
    nlohmann::json arts = nlohmann::json::array();
    for (const auto& a : result.artifacts) arts.push_back(std::filesystem::relative(a, options.out_dir).string());
    if (logs) {
      for (int i = 0; i < n; ++i) {
        arts.push_back("logs/episode_" + std::to_string(i) + "_seed_" + std::to_string(config.seeds[i]) + ".jsonl");
      }
    }
    manifest["artifacts"] = arts;
    manifest["failures"] = result.failures;
    const auto manifest_path = options.out_dir / "manifest.json";
    auto out = open_out(manifest_path);
    out << manifest.dump(2) << '\n';
    close_checked(out, manifest_path);
    result.artifacts.push_back(manifest_path);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Training

namespace {

/// Discounted Monte Carlo returns of one trajectory's (already scaled) rewards.
std::vector<double> discounted_returns(const rl::Trajectory& t, double gamma) {
  std::vector<double> r(t.samples.size());
  double acc = 0.0;
  for (std::size_t i = t.samples.size(); i-- > 0;) {
    if (t.samples[i].done) acc = 0.0;
    acc = t.samples[i].reward + gamma * acc;
    r[i] = acc;
  }
  return r;
}

bool all_finite(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

void write_train_log(const std::filesystem::path& path, const std::vector<UpdateLogRow>& rows) {
  auto out = open_out(path);
  out << "update\tepisodes\tmean_return\tclip_fraction\tvalue_loss\tpolicy_loss\tentropy\tmean_ratio\t"
         "sil_contributions\tsil_buffer\tsamples\n";
  for (const auto& r : rows) {
    out << r.update << '\t' << r.episodes << '\t' << fmt(r.mean_return) << '\t' << fmt(r.clip_fraction) << '\t'
        << fmt(r.value_loss) << '\t' << fmt(r.policy_loss) << '\t' << fmt(r.entropy) << '\t' << fmt(r.mean_ratio)
        << '\t' << r.sil_contributions << '\t' << r.sil_buffer << '\t' << r.samples << '\n';
  }
  close_checked(out, path);
}

void write_inventory_diagnostics(const std::filesystem::path& dir, const std::array<std::vector<int>, 3>& by_rho) {
  const auto summary_path = dir / "inventory_by_rho.tsv";
  auto out = open_out(summary_path);
  out << "rho\tsamples\tmedian\tmean\tp10\tp90\n";
  for (int r = 0; r < 3; ++r) {
    std::vector<int> v = by_rho[r];
    out << (r - 1) << '\t' << v.size();
    if (v.empty()) {
      out << "\tNA\tNA\tNA\tNA\n";
      continue;
    }
    std::sort(v.begin(), v.end());
    std::vector<double> d(v.begin(), v.end());
    auto q = [&](double p) { return d[static_cast<std::size_t>(std::floor(p * static_cast<double>(d.size() - 1)))]; };
    out << '\t' << fmt(stats::median(d)) << '\t' << fmt(stats::summarize(d).mean) << '\t' << fmt(q(0.1)) << '\t'
        << fmt(q(0.9)) << '\n';
  }
  close_checked(out, summary_path);
  const auto hist_path = dir / "inventory_hist.tsv";
  auto hist = open_out(hist_path);
  hist << "rho\tinventory\tcount\n";
  for (int r = 0; r < 3; ++r) {
    std::map<int, std::size_t> counts;
    for (const int x : by_rho[r]) ++counts[x];
    for (const auto& [inv, c] : counts) hist << (r - 1) << '\t' << inv << '\t' << c << '\n';
  }
  close_checked(hist, hist_path);
}

}  // namespace

TrainResult train_policy(const ScenarioConfig& config, const TrainOptions& options) {
  config.validate();
  if (!config.rl) throw ConfigError("training needs a scenario with an RL agent");
  const auto& tc = config.training;
  const auto& ppo = tc.ppo;
  const int episodes = options.episodes.value_or(tc.episodes);
  if (episodes < 1) throw ConfigError("training: episodes must be >= 1");
  const auto params = config.load_hawkes();
  const bool frl = config.rl->mode == RlMode::frl;

  TrainResult result;
  if (options.init_checkpoint) {
    result.params = rl::checkpoint_load(*options.init_checkpoint, rl::Architecture{});
    if (result.params.rho_aware != frl) throw ConfigError("initial checkpoint rho mode does not match the scenario");
  } else {
    Rng init(derive_seed(tc.seed, 0));
    result.params.initialize(init);
    result.params.rho_aware = frl;
  }
  const bool write = !options.out_dir.empty();
  if (write) ensure_dir(options.out_dir / "checkpoints");

  rl::Adam adam(result.params.size(), ppo.learning_rate);
  rl::SilBuffer sil(static_cast<std::size_t>(ppo.sil_capacity));
  Rng trainer(derive_seed(tc.seed, 0x5eed));
  std::vector<double> grad(result.params.size());
  auto last_good = result.params;
  const int fixed_from = static_cast<int>(std::ceil(episodes * (1.0 - tc.fixed_start_fraction)));

  int done = 0;
  int update = 0;
  while (done < episodes && !result.diverged) {
    const int batch = std::min(tc.episodes_per_update, episodes - done);
    std::vector<EpisodeStats> runs(batch);
    // Rollouts read a fixed snapshot of the parameters.
    const rl::PolicyParams snapshot = result.params;
    parallel_for(batch, config.workers, [&](int b) {
      const int ep = done + b;
      const auto seed = derive_seed(tc.seed, static_cast<std::uint64_t>(ep) + 1);
      const auto setup = make_episode_setup(config, seed, ep, ep >= fixed_from);
      EpisodeOptions eo;
      eo.keep_trajectory = true;
      runs[b] = run_episode(config, params, setup, &snapshot, eo);
    });

    std::vector<rl::Trajectory> trajs;
    double return_sum = 0.0;
    for (auto& r : runs) {
      if (r.aborted) throw std::runtime_error("training episode aborted: " + r.abort_reason);
      result.episode_returns.push_back(r.rl_return);
      return_sum += r.rl_return;
      for (const auto& s : r.samples) {
        if (s.time >= r.rl_start) result.inventory_by_rho[s.rho + 1].push_back(s.rl_inventory);
      }
      if (!r.trajectory.samples.empty()) trajs.push_back(std::move(r.trajectory));
    }
    done += batch;

    std::vector<const rl::Sample*> all;
    for (auto& t : trajs) {
      for (auto& s : t.samples) s.reward *= ppo.reward_scale;
      rl::compute_gae(t, ppo.gamma, ppo.lambda);
      for (const auto& s : t.samples) all.push_back(&s);
    }
    if (all.empty()) continue;
    {
      // Advantage normalization, skipped when degenerate.
      double m = 0.0;
      for (const auto* s : all) m += s->advantage;
      m /= static_cast<double>(all.size());
      double v = 0.0;
      for (const auto* s : all) v += (s->advantage - m) * (s->advantage - m);
      const double sd = std::sqrt(v / static_cast<double>(all.size()));
      if (sd > 1e-8) {
        for (auto& t : trajs) {
          for (auto& s : t.samples) s.advantage = (s.advantage - m) / sd;
        }
      }
    }

    UpdateLogRow row;
    row.update = update++;
    row.episodes = done;
    row.mean_return = return_sum / batch;
    row.samples = all.size();
    std::size_t minibatches = 0;
    std::vector<std::size_t> order(all.size());
    std::iota(order.begin(), order.end(), 0);
    const auto mb = static_cast<std::size_t>(ppo.minibatch);
    bool bad = false;
    for (int epoch = 0; epoch < ppo.epochs && !bad; ++epoch) {
      for (std::size_t i = order.size(); i > 1; --i) {
        std::swap(order[i - 1], order[static_cast<std::size_t>(trainer.uniform() * static_cast<double>(i))]);
      }
      for (std::size_t begin = 0; begin < order.size(); begin += mb) {
        std::vector<const rl::Sample*> batch_ptrs;
        for (std::size_t i = begin; i < std::min(order.size(), begin + mb); ++i) batch_ptrs.push_back(all[order[i]]);
        const auto d = rl::ppo_loss_and_grad(result.params, batch_ptrs, ppo, grad);
        if (!std::isfinite(d.loss) || !all_finite(grad)) {
          bad = true;
          break;
        }
        rl::clip_grad_norm(grad, ppo.max_grad_norm);
        adam.step(result.params.values(), grad);
        row.clip_fraction += d.clip_fraction;
        row.value_loss += d.value_loss;
        row.policy_loss += d.policy_loss;
        row.entropy += d.entropy;
        row.mean_ratio += d.mean_ratio;
        ++minibatches;
      }
    }
    if (minibatches > 0) {
      const double k = static_cast<double>(minibatches);
      row.clip_fraction /= k;
      row.value_loss /= k;
      row.policy_loss /= k;
      row.entropy /= k;
      row.mean_ratio /= k;
    }

    // Self-imitation: admit transitions whose return beats the current value.
    if (!bad && ppo.sil_weight > 0.0) {
      for (const auto& t : trajs) {
        const auto returns = discounted_returns(t, ppo.gamma);
        for (std::size_t i = 0; i < t.samples.size(); ++i) {
          const auto& s = t.samples[i];
          const double v = rl::value_forward(result.params, s.obs);
          if (!(returns[i] > v)) continue;
          rl::SilEntry e;
          e.obs = s.obs;
          e.mask = s.mask;
          e.intervene = s.intervene;
          e.action = s.action;
          e.ret = returns[i];
          sil.insert(std::move(e), v);
        }
      }
      for (int u = 0; u < ppo.sil_updates && !sil.empty(); ++u) {
        const auto batch_ptrs = sil.sample(trainer, static_cast<std::size_t>(ppo.sil_batch));
        const auto d = rl::sil_loss_and_grad(result.params, batch_ptrs, ppo, grad);
        if (!std::isfinite(d.loss) || !all_finite(grad)) {
          bad = true;
          break;
        }
        rl::clip_grad_norm(grad, ppo.max_grad_norm);
        adam.step(result.params.values(), grad);
        row.sil_contributions += d.contributing;
      }
    }
    row.sil_buffer = sil.size();
    if (bad || !all_finite(result.params.values())) {
      result.diverged = true;
      result.params = last_good;
      if (options.progress) *options.progress << "training diverged at update " << row.update << "; keeping last good parameters\n";
    } else {
      last_good = result.params;
      result.log.push_back(row);
      if (options.progress) {
        *options.progress << config.name << ": update " << row.update << " episodes " << done << " mean return "
                          << fmt(row.mean_return) << " clip " << fmt(row.clip_fraction) << " sil " << row.sil_contributions
                          << '\n';
      }
    }
    if (write && (done % tc.checkpoint_every == 0 || done == episodes || result.diverged)) {
      const auto path = options.out_dir / "checkpoints" / ("policy_ep" + std::to_string(done) + ".bin");
      rl::checkpoint_save(result.params, path);
      result.checkpoints.push_back(path);
    }
  }

  if (write) {
    const auto final_path = options.out_dir / "policy.bin";
    rl::checkpoint_save(result.params, final_path);
    result.checkpoints.push_back(final_path);
    write_train_log(options.out_dir / "train_log.tsv", result.log);
    write_inventory_diagnostics(options.out_dir, result.inventory_by_rho);
    nlohmann::json manifest;
    manifest["scenario"] = config.name;
    manifest["config_hash"] = hex64(config.hash());
    manifest["config"] = config.raw;
    manifest["episodes"] = episodes;
    manifest["training_seed"] = tc.seed;
    manifest["diverged"] = result.diverged;
    manifest["policy_hash"] = hex64(rl::params_hash(result.params));
    manifest["rho_aware"] = result.params.rho_aware;
    nlohmann::json arts = {"policy.bin", "train_log.tsv", "inventory_by_rho.tsv", "inventory_hist.tsv"};
    for (const auto& c : result.checkpoints) arts.push_back(std::filesystem::relative(c, options.out_dir).string());
    manifest["artifacts"] = arts;
    const auto path = options.out_dir / "manifest.json";
    auto out = open_out(path);
    out << manifest.dump(2) << '\n';
    close_checked(out, path);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Evaluation

namespace {

nlohmann::json cell(const std::vector<double>& v) {
  const auto s = stats::summarize(v);
  nlohmann::json j = {{"n", s.n}};
  if (s.n == 0) {
    j["mean"] = nullptr;
    j["std"] = nullptr;
    j["ci95"] = nullptr;
  } else {
    j["mean"] = s.mean;
    j["std"] = s.stddev;
    j["ci95"] = s.ci95;
  }
  return j;
}

template <typename Pick>
std::vector<double> gather(const std::vector<EpisodeStats>& eps, Pick pick) {
  std::vector<double> v;
  for (const auto& e : eps) {
    if (e.aborted) continue;
    if (const std::optional<double> x = pick(e)) v.push_back(*x);
  }
  return v;
}

}  // namespace

nlohmann::json EvaluationReport::to_json() const {
  auto before = [](const EpisodeStats& e) { return e.sharpe_before; };
  auto during = [](const EpisodeStats& e) { return e.sharpe_during; };
  auto slip = [](const EpisodeStats& e) { return e.slippage_bps; };
  auto ret_during = [](const EpisodeStats& e) { return std::optional<double>(e.return_during); };
  auto ret_before = [](const EpisodeStats& e) { return std::optional<double>(e.return_before); };
  nlohmann::json j;
  j["scenario"] = scenario;
  j["mode"] = to_string(mode);
  j["policy_hash"] = hex64(policy_hash);
  j["episodes_per_side"] = episodes_per_side;
  j["seeds"] = seeds;
  j["annualization_seconds"] = metrics::kTradingSecondsPerYear;
  j["sharpe"] = {{"before", {{"buy", cell(gather(buy, before))}, {"sell", cell(gather(sell, before))}}},
                 {"during", {{"buy", cell(gather(buy, during))}, {"sell", cell(gather(sell, during))}}}};
  j["slippage_bps"] = {{"buy", cell(gather(buy, slip))}, {"sell", cell(gather(sell, slip))}};
  j["return"] = {{"before", {{"buy", cell(gather(buy, ret_before))}, {"sell", cell(gather(sell, ret_before))}}},
                 {"during", {{"buy", cell(gather(buy, ret_during))}, {"sell", cell(gather(sell, ret_during))}}}};
  if (!baseline_buy.empty() || !baseline_sell.empty()) {
    const auto bb = gather(baseline_buy, slip);
    const auto bs = gather(baseline_sell, slip);
    j["baseline_slippage_bps"] = {{"buy", cell(bb)}, {"sell", cell(bs)}};
    const auto mb = mean_of(gather(buy, slip));
    const auto ms = mean_of(gather(sell, slip));
    const auto mbb = mean_of(bb);
    const auto mbs = mean_of(bs);
    nlohmann::json cmp;
    cmp["buy_minus_baseline"] = (mb && mbb) ? nlohmann::json(*mb - *mbb) : nlohmann::json(nullptr);
    cmp["sell_minus_baseline"] = (ms && mbs) ? nlohmann::json(*ms - *mbs) : nlohmann::json(nullptr);
    j["slippage_vs_baseline"] = cmp;
  }
  return j;
}

EvaluationReport evaluate_policy(const rl::PolicyParams& policy, const ScenarioConfig& config, int episodes,
                                 const EvaluateOptions& options) {
  if (episodes < 1) throw ConfigError("evaluation: episodes must be >= 1");
  if (!config.rl) throw ConfigError("evaluation needs a scenario with an RL agent");
  if (!config.twap) throw ConfigError("evaluation needs a scenario with a TWAP");
  const bool frl = config.rl->mode == RlMode::frl;
  if (policy.rho_aware != frl) {
    throw ConfigError(std::string("checkpoint rho mode (") + (policy.rho_aware ? "fRL" : "uRL") +
                      ") does not match the scenario mode (" + std::string(to_string(config.rl->mode)) + ")");
  }
  const auto params = config.load_hawkes();
  EvaluationReport rep;
  rep.scenario = config.name;
  rep.mode = config.rl->mode;
  rep.policy_hash = rl::params_hash(policy);
  rep.episodes_per_side = episodes;
  for (int i = 0; i < episodes; ++i) {
    const auto s = static_cast<std::size_t>(i) < config.seeds.size()
                       ? config.seeds[i]
                       : config.seeds.back() + static_cast<std::uint64_t>(i) - config.seeds.size() + 1;
    rep.seeds.push_back(s);
  }
  auto side_config = [&](Direction side, bool with_rl) {
    ScenarioConfig c = config;
    c.twap->side_mix.reset();
    c.twap->config.side = side;
    c.twap->start = StartPolicy{StartPolicy::Kind::fixed, config.evaluation.twap_start, 0.0};
    if (!with_rl) c.rl.reset();
    return c;
  };
  auto run_side = [&](Direction side, bool with_rl) {
    const ScenarioConfig c = side_config(side, with_rl);
    std::vector<EpisodeStats> out(episodes);
    parallel_for(episodes, c.workers, [&](int i) {
      const auto setup = make_episode_setup(c, rep.seeds[i], i, true);
      out[i] = run_episode(c, params, setup, with_rl ? &policy : nullptr);
      out[i].samples.clear();
    });
    if (options.run.progress) {
      *options.run.progress << config.name << ": evaluated " << episodes << " " << to_string(side) << " episodes"
                            << (with_rl ? "" : " (TWAP alone)") << '\n';
    }
    return out;
  };
  rep.buy = run_side(Direction::buy, true);
  rep.sell = run_side(Direction::sell, true);
  if (options.with_baseline) {
    rep.baseline_buy = run_side(Direction::buy, false);
    rep.baseline_sell = run_side(Direction::sell, false);
  }

  const auto& dir = options.run.out_dir;
  if (!dir.empty()) {
    ensure_dir(dir);
    const auto j = rep.to_json();
    {
      const auto path = dir / "eval_report.json";
      auto out = open_out(path);
      out << j.dump(2) << '\n';
      close_checked(out, path);
    }
    auto mean_cell = [](const nlohmann::json& c) { return c.at("mean").is_null() ? std::string("NA") : fmt(c.at("mean").get<double>()); };
    {
      const auto path = dir / "sharpe_table.tsv";
      auto out = open_out(path);
      out << "window\tbuy\tsell\n";
      for (const char* w : {"before", "during"}) {
        out << w << '\t' << mean_cell(j["sharpe"][w]["buy"]) << '\t' << mean_cell(j["sharpe"][w]["sell"]) << '\n';
      }
      close_checked(out, path);
    }
    {
      const auto path = dir / "slippage_table.tsv";
      auto out = open_out(path);
      out << "agent\tbuy\tsell\n";
      out << "with_rl\t" << mean_cell(j["slippage_bps"]["buy"]) << '\t' << mean_cell(j["slippage_bps"]["sell"]) << '\n';
      if (j.contains("baseline_slippage_bps")) {
        out << "twap_alone\t" << mean_cell(j["baseline_slippage_bps"]["buy"]) << '\t'
            << mean_cell(j["baseline_slippage_bps"]["sell"]) << '\n';
      }
      close_checked(out, path);
    }
    std::vector<EpisodeStats> all = rep.buy;
    all.insert(all.end(), rep.sell.begin(), rep.sell.end());
    write_stats(dir / "stats.tsv", all);
  }
  return rep;
}

}  // namespace hlob
