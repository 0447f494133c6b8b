#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hlob/metrics.hpp"
#include "hlob/rl_policy.hpp"
#include "hlob/scenario.hpp"
#include "hlob/stat_tests.hpp"

namespace hlob {

inline constexpr AgentId kTwapAgentId = 1;
inline constexpr AgentId kRlAgentId = 2;

/// Everything random about an episode that is decided before it starts.
struct EpisodeSetup {
  int index = 0;
  std::uint64_t seed = 1;
  /// start_time is the offset after the warm-up.
  std::optional<TwapConfig> twap;
  bool rl = false;
  double rl_start = 0.0;
};

/// Draws the TWAP side (from the side mix, if any) and start offset. With
/// `fixed_start` the start is the evaluation start instead of a draw.
EpisodeSetup make_episode_setup(const ScenarioConfig& config, std::uint64_t seed, int index, bool fixed_start = false);

struct SamplePoint {
  double time = 0.0;
  double mid = 0.0;       // ticks
  double rl_mtm = 0.0;    // currency
  int rl_inventory = 0;
  int twap_executed = 0;
  int rho = 0;
};

struct EpisodeStats {
  std::string scenario;
  int episode = 0;
  std::uint64_t seed = 0;
  bool aborted = false;
  std::string abort_reason;

  double warmup_end = 0.0;
  double end = 0.0;
  long long exogenous_mo_volume = 0;  // during the trading period
  double volume_per_second = 0.0;
  ExchangeCounters counters;
  std::uint64_t log_hash = 0;
  std::uint64_t log_records = 0;
  std::uint64_t final_book_hash = 0;

  bool has_twap = false;
  Direction twap_side = Direction::buy;
  double twap_start = 0.0;  // absolute seconds
  double twap_end = 0.0;
  int twap_quantity = 0;
  double twap_horizon = 0.0;
  int executed = 0;
  bool completed = false;
  double arrival_mid = 0.0;
  double average_price = 0.0;
  std::optional<double> slippage_bps;
  std::optional<double> pov_pct;
  /// Executed units per scheduled action.
  double mean_child_size = 0.0;
  /// Units per submitted order (limit and market children).
  double mean_order_size = 0.0;
  int twap_wakes = 0;
  int limit_children = 0;
  int market_children = 0;
  double max_schedule_gap = 0.0;
  bool side_pure = true;
  std::uint64_t twap_downgraded = 0;
  std::vector<metrics::ImpactPoint> impact_curve;
  std::vector<metrics::DecayPoint> decay_path;
  std::optional<double> sql_delta;
  std::optional<double> beta;

  bool has_rl = false;
  double rl_start = 0.0;
  double rl_return = 0.0;
  double return_before = 0.0;
  double return_during = 0.0;
  std::optional<double> sharpe_before;
  std::optional<double> sharpe_during;
  std::size_t before_increments = 0;
  std::size_t during_increments = 0;
  std::uint64_t interventions = 0;
  std::uint64_t rl_downgraded = 0;
  std::uint64_t stale_observations = 0;
  int final_inventory = 0;
  rl::Trajectory trajectory;

  std::vector<SamplePoint> samples;
};

struct EpisodeOptions {
  std::ostream* log_sink = nullptr;
  bool keep_trajectory = false;
};

/// One seeded episode: warm-up with exogenous flow only, then agents at their
/// start times. `policy` is required when the setup has an RL agent.
EpisodeStats run_episode(const ScenarioConfig& config, const hawkes::HawkesParams& params, const EpisodeSetup& setup,
                         const rl::PolicyParams* policy, const EpisodeOptions& options = {});

// ---------------------------------------------------------------------------

struct RunOptions {
  /// Empty: nothing is written.
  std::filesystem::path out_dir;
  std::ostream* progress = nullptr;
  /// Overrides the scenario's checkpoint.
  std::optional<std::filesystem::path> checkpoint;
};

struct ScenarioFits {
  std::vector<metrics::ImpactPoint> binned_impact;
  metrics::PowerFit sql;
  std::vector<metrics::DecayPoint> decay;
  metrics::DecayFit beta;
  bool has_decay = false;
};

struct ScenarioResult {
  std::vector<EpisodeStats> episodes;
  std::vector<std::string> failures;
  ScenarioFits fits;
  std::vector<std::filesystem::path> artifacts;
};

/// Policy for the scenario's RL agent: the checkpoint if one is given (its
/// rho flag must match the mode), otherwise a fresh initialization.
rl::PolicyParams resolve_policy(const ScenarioConfig& config, const std::optional<std::filesystem::path>& checkpoint);

/// Runs every seed, aggregates, and writes stats, summary, fits, logs and a manifest.
ScenarioResult run_scenario(const ScenarioConfig& config, const RunOptions& options = {});

/// Averages TWAP impact curves and post-execution paths across episodes and fits both exponents.
ScenarioFits fit_scenario(const std::vector<EpisodeStats>& episodes);

// ---------------------------------------------------------------------------

struct UpdateLogRow {
  int update = 0;
  int episodes = 0;
  double mean_return = 0.0;
  double clip_fraction = 0.0;
  double value_loss = 0.0;
  double policy_loss = 0.0;
  double entropy = 0.0;
  double mean_ratio = 0.0;
  std::size_t sil_contributions = 0;
  std::size_t sil_buffer = 0;
  std::size_t samples = 0;
};

struct TrainOptions {
  std::filesystem::path out_dir;
  std::ostream* progress = nullptr;
  std::optional<int> episodes;
  /// Starting parameters; a fresh initialization otherwise.
  std::optional<std::filesystem::path> init_checkpoint;
};

struct TrainResult {
  rl::PolicyParams params;
  std::vector<UpdateLogRow> log;
  std::vector<double> episode_returns;
  std::vector<std::filesystem::path> checkpoints;
  bool diverged = false;
  /// Inventory samples per rho regime (-1, 0, +1).
  std::array<std::vector<int>, 3> inventory_by_rho;
};

/// PPO with self-imitation over episodes of the scenario. Each episode draws
/// its TWAP side and start; the trailing fraction uses the fixed start.
TrainResult train_policy(const ScenarioConfig& config, const TrainOptions& options = {});

// ---------------------------------------------------------------------------

struct EvaluationReport {
  std::string scenario;
  RlMode mode = RlMode::url;
  std::uint64_t policy_hash = 0;
  int episodes_per_side = 0;
  std::vector<std::uint64_t> seeds;
  std::vector<EpisodeStats> buy;
  std::vector<EpisodeStats> sell;
  /// The same seeds with the TWAP alone.
  std::vector<EpisodeStats> baseline_buy;
  std::vector<EpisodeStats> baseline_sell;

  /// {"sharpe": {before, during} x {buy, sell}, "slippage_bps": {buy, sell}, ...}.
  nlohmann::json to_json() const;
};

struct EvaluateOptions {
  RunOptions run;
  bool with_baseline = true;
};

/// 20 buy and 20 sell episodes (by default) with the TWAP starting at the
/// evaluation time. Refuses a policy whose rho flag disagrees with the mode.
EvaluationReport evaluate_policy(const rl::PolicyParams& policy, const ScenarioConfig& config, int episodes,
                                 const EvaluateOptions& options = {});

// ---------------------------------------------------------------------------

/// Columns every stats table starts with.
const std::vector<std::string>& stats_columns();
/// Columns that follow stats_columns() in a stats table.
const std::vector<std::string>& stats_extra_columns();

/// One row per (episode, agent); episodes without agents get one market row.
void write_stats(const std::filesystem::path& path, const std::vector<EpisodeStats>& episodes);
void write_summary(const std::filesystem::path& path, const std::string& scenario,
                   const std::vector<EpisodeStats>& episodes, const ScenarioFits& fits);
void write_fits(const std::filesystem::path& dir, const ScenarioFits& fits);

/// Parallel map over [0, n) with `workers` threads; results stay in index order.
void parallel_for(int n, int workers, const std::function<void(int)>& body);

}  // namespace hlob
