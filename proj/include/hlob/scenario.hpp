#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hlob/agent_api.hpp"
#include "hlob/rl_agent.hpp"
#include "hlob/rl_policy.hpp"
#include "hlob/rng.hpp"
#include "hlob/twap.hpp"

namespace hlob {

/// When an agent starts, in seconds after the warm-up.
struct StartPolicy {
  enum class Kind : std::uint8_t { fixed, normal };
  Kind kind = Kind::fixed;
  double value = 0.0;  // fixed offset, or the mean of the normal draw
  double sigma = 0.0;

  /// Offset for one episode, clamped into [lo, hi].
  double draw(Rng& rng, double lo, double hi) const;

  static StartPolicy from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

/// Per-episode side of the meta-order; probabilities need not be normalized.
struct SideMix {
  double buy = 0.4;
  double sell = 0.4;
  double none = 0.2;

  /// nullopt means no TWAP this episode.
  std::optional<Direction> draw(Rng& rng) const;
};

struct TwapSpec {
  TwapConfig config;
  StartPolicy start;
  std::optional<SideMix> side_mix;
};

enum class RlMode : std::uint8_t { url, frl };

std::string_view to_string(RlMode m);

struct RlSpec {
  RlMode mode = RlMode::url;
  rl::MarketMakerConfig agent;
  /// Seconds after the warm-up.
  double start = 0.0;
  std::optional<std::filesystem::path> checkpoint;
  /// Seed of the freshly initialized policy used when no checkpoint is given.
  std::uint64_t init_seed = 1;
};

struct TrainingSpec {
  int episodes = 140;
  int episodes_per_update = 1;
  int checkpoint_every = 20;
  /// Trailing fraction of episodes whose TWAP starts at the fixed evaluation time.
  double fixed_start_fraction = 0.25;
  std::uint64_t seed = 7;
  rl::PpoConfig ppo;
};

struct EvaluationSpec {
  int episodes = 20;
  /// TWAP start, seconds after the warm-up.
  double twap_start = 150.0;
};

struct ScenarioConfig {
  std::string name;
  std::vector<std::uint64_t> seeds;
  double warmup = 100.0;
  double trading = 300.0;
  std::filesystem::path hawkes_path;
  double volume_scale = 1.0;
  ExchangeConfig exchange;
  std::optional<TwapSpec> twap;
  std::optional<RlSpec> rl;
  TrainingSpec training;
  EvaluationSpec evaluation;
  double sample_interval = 1.0;
  bool write_logs = true;
  int workers = 1;
  /// Raw document, kept for hashing and the manifest.
  nlohmann::json raw;
  std::filesystem::path source;

  /// Throws ConfigError on any broken invariant.
  void validate() const;

  /// Relative paths resolve against `base_dir`.
  static ScenarioConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);

  /// Loads the Hawkes parameters with the scenario's volume scale applied.
  hawkes::HawkesParams load_hawkes() const;

  /// FNV-1a of the canonical dump of `raw`.
  std::uint64_t hash() const;
};

/// Directory holding hawkes_default.json and scenarios/. Overridable through
/// the HLOB_CONFIG_DIR environment variable.
std::filesystem::path config_dir();

/// An existing file path, or a registry name looked up in config_dir()/scenarios.
std::filesystem::path resolve_scenario(const std::string& name_or_path);

ScenarioConfig load_scenario(const std::string& name_or_path);

/// The published registry of scenario names.
const std::vector<std::string>& scenario_registry();

/// "N" means seeds 1..N; "a,b,c" is an explicit list.
std::vector<std::uint64_t> parse_seed_list(const std::string& text);

}  // namespace hlob
