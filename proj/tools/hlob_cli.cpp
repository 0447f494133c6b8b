#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "hlob/report.hpp"
#include "hlob/runner.hpp"

namespace {

enum Exit : int { ok = 0, usage = 2, config = 3, io = 4, runtime = 5, schema = 6 };

int fail(const char* category, const std::string& message, int code) {
  std::cerr << "error[" << category << "]: " << message << '\n';
  return code;
}

struct Common {
  std::string config;
  std::string seeds;
  std::string out;
  std::string checkpoint;
  int episodes = 0;
  bool quiet = false;
};

hlob::ScenarioConfig load(const Common& c) {
  auto cfg = hlob::load_scenario(c.config);
  if (!c.seeds.empty()) cfg.seeds = hlob::parse_seed_list(c.seeds);
  return cfg;
}

std::filesystem::path out_dir(const Common& c, const std::string& fallback) {
  return c.out.empty() ? std::filesystem::path("runs") / fallback : std::filesystem::path(c.out);
}

std::optional<std::filesystem::path> checkpoint(const Common& c) {
  if (c.checkpoint.empty()) return std::nullopt;
  return std::filesystem::path(c.checkpoint);
}

void print_fits(const hlob::ScenarioFits& f) {
  if (f.sql.ok) {
    std::cout << "impact exponent delta = " << f.sql.exponent << " (R^2 " << f.sql.r2 << ", " << f.sql.points_used
              << " points)\n";
  } else {
    std::cout << "impact exponent: no valid fit\n";
  }
  if (f.has_decay && f.beta.ok) {
    std::cout << "decay exponent beta = " << f.beta.beta << " (rmse " << f.beta.rmse << ")\n";
  } else {
    std::cout << "decay exponent: no valid fit\n";
  }
}

int run_simulate(const Common& c, bool impact) {
  const auto cfg = load(c);
  if (impact && !cfg.twap) throw hlob::ConfigError("impact needs a scenario with a TWAP agent");
  hlob::RunOptions opt;
  opt.out_dir = out_dir(c, cfg.name);
  opt.progress = c.quiet ? nullptr : &std::cerr;
  opt.checkpoint = checkpoint(c);
  const auto r = hlob::run_scenario(cfg, opt);
  std::cout << cfg.name << ": " << r.episodes.size() - r.failures.size() << "/" << cfg.seeds.size()
            << " episodes completed; outputs in " << opt.out_dir.string() << '\n';
  for (const auto& f : r.failures) std::cout << "  failed: " << f << '\n';
  if (impact) print_fits(r.fits);
  return r.failures.size() == cfg.seeds.size() && !cfg.seeds.empty() ? Exit::runtime : Exit::ok;
}

int run_train(const Common& c) {
  const auto cfg = load(c);
  hlob::TrainOptions opt;
  opt.out_dir = out_dir(c, cfg.name);
  opt.progress = c.quiet ? nullptr : &std::cerr;
  if (c.episodes > 0) opt.episodes = c.episodes;
  opt.init_checkpoint = checkpoint(c);
  const auto r = hlob::train_policy(cfg, opt);
  std::cout << cfg.name << ": " << r.log.size() << " updates; policy in " << (opt.out_dir / "policy.bin").string()
            << (r.diverged ? " (training diverged; last good parameters kept)" : "") << '\n';
  return r.diverged ? Exit::runtime : Exit::ok;
}

int run_evaluate(const Common& c) {
  const auto cfg = load(c);
  const auto policy = hlob::resolve_policy(cfg, checkpoint(c));
  hlob::EvaluateOptions opt;
  opt.run.out_dir = out_dir(c, cfg.name);
  opt.run.progress = c.quiet ? nullptr : &std::cerr;
  const int episodes = c.episodes > 0 ? c.episodes : cfg.evaluation.episodes;
  const auto rep = hlob::evaluate_policy(policy, cfg, episodes, opt);
  std::cout << rep.to_json().dump(2) << '\n';
  return Exit::ok;
}

int run_report(const std::string& from, const std::string& out) {
  const std::filesystem::path dst = out.empty() ? std::filesystem::path(from) / "report" : std::filesystem::path(out);
  const auto r = hlob::report::render_report(from, dst);
  if (r.nothing_to_report) {
    std::cout << "nothing to report\n";
    return Exit::ok;
  }
  for (const auto& f : r.files) std::cout << f.string() << '\n';
  return Exit::ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hawkes-driven limit order book simulator with TWAP and RL market-making agents"};
  app.require_subcommand(1, 1);
  Common c;
  auto add_common = [&](CLI::App* sub, bool seeds, bool episodes) {
    sub->add_option("--config", c.config, "Scenario name or path to a scenario JSON")->required();
    if (seeds) sub->add_option("--seeds", c.seeds, "Seed count N (seeds 1..N) or a comma-separated list");
    sub->add_option("--out", c.out, "Output directory");
    sub->add_option("--checkpoint", c.checkpoint, "Policy checkpoint");
    if (episodes) sub->add_option("--episodes", c.episodes, "Episode count")->check(CLI::PositiveNumber);
    sub->add_flag("--quiet", c.quiet, "Suppress progress output");
  };
  auto* simulate = app.add_subcommand("simulate", "Run a scenario over its seeds");
  add_common(simulate, true, false);
  auto* impact = app.add_subcommand("impact", "Run an impact study and fit the impact and decay exponents");
  add_common(impact, true, false);
  auto* train = app.add_subcommand("train", "Train a market-making policy");
  add_common(train, false, true);
  auto* evaluate = app.add_subcommand("evaluate", "Evaluate a policy against buy and sell TWAPs");
  add_common(evaluate, true, true);
  auto* report = app.add_subcommand("report", "Render tables and SVG plots from an output directory");
  std::string from;
  std::string report_out;
  report->add_option("--from", from, "Directory with stats tables")->required();
  report->add_option("--out", report_out, "Report directory (default: <from>/report)");
  report->add_flag("--quiet", c.quiet, "Suppress progress output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    return fail("usage", e.what(), Exit::usage);
  }

  try {
    if (simulate->parsed()) return run_simulate(c, false);
    if (impact->parsed()) return run_simulate(c, true);
    if (train->parsed()) return run_train(c);
    if (evaluate->parsed()) return run_evaluate(c);
    return run_report(from, report_out);
  } catch (const hlob::report::SchemaError& e) {
    return fail("schema", e.what(), Exit::schema);
  } catch (const hlob::ConfigError& e) {
    return fail("config", e.what(), Exit::config);
  } catch (const std::ios_base::failure& e) {
    return fail("io", e.what(), Exit::io);
  } catch (const std::filesystem::filesystem_error& e) {
    return fail("io", e.what(), Exit::io);
  } catch (const std::exception& e) {
    return fail("runtime", e.what(), Exit::runtime);
  }
}
