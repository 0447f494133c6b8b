#include "hlob/scenario.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace hlob {

namespace {

using nlohmann::json;

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, _] : j.items()) {
    if (!allowed.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback, const std::string& where) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + ": bad value for '" + key + "': " + e.what());
  }
}

std::filesystem::path resolve_path(const std::string& p, const std::filesystem::path& base) {
  std::filesystem::path path(p);
  return path.is_absolute() ? path : (base / path).lexically_normal();
}

ExchangeConfig exchange_from_json(const json& j) {
  const std::string where = "exchange";
  reject_unknown(j, {"initial_mid", "tick_size", "initial_levels", "initial_orders_per_level", "initial_order_size",
                     "seed_order_size", "agents_excite", "max_order_size"},
                 where);
  ExchangeConfig c;
  c.initial_mid = get_or<Ticks>(j, "initial_mid", c.initial_mid, where);
  c.tick_size = get_or(j, "tick_size", c.tick_size, where);
  c.initial_levels = get_or(j, "initial_levels", c.initial_levels, where);
  c.initial_orders_per_level = get_or(j, "initial_orders_per_level", c.initial_orders_per_level, where);
  c.initial_order_size = get_or(j, "initial_order_size", c.initial_order_size, where);
  c.seed_order_size = get_or(j, "seed_order_size", c.seed_order_size, where);
  c.agents_excite = get_or(j, "agents_excite", c.agents_excite, where);
  c.max_order_size = get_or(j, "max_order_size", c.max_order_size, where);
  if (c.initial_mid < 10 || !(c.tick_size > 0.0) || c.initial_levels < 1 || c.initial_orders_per_level < 1 ||
      c.initial_order_size < 1 || c.seed_order_size < 1 || c.max_order_size < 1) {
    throw ConfigError("exchange: sizes, levels, tick and mid must be positive");
  }
  return c;
}

rl::PpoConfig ppo_from_json(const json& j) {
  const std::string where = "training.ppo";
  reject_unknown(j, {"clip", "gamma", "lambda", "learning_rate", "epochs", "minibatch", "entropy_coef", "value_coef",
                     "max_grad_norm", "sil_weight", "sil_value_coef", "sil_capacity", "sil_batch", "sil_updates",
                     "intervention_cost", "fee_rate", "reward_scale"},
                 where);
  rl::PpoConfig c;
  c.clip = get_or(j, "clip", c.clip, where);
  c.gamma = get_or(j, "gamma", c.gamma, where);
  c.lambda = get_or(j, "lambda", c.lambda, where);
  c.learning_rate = get_or(j, "learning_rate", c.learning_rate, where);
  c.epochs = get_or(j, "epochs", c.epochs, where);
  c.minibatch = get_or(j, "minibatch", c.minibatch, where);
  c.entropy_coef = get_or(j, "entropy_coef", c.entropy_coef, where);
  c.value_coef = get_or(j, "value_coef", c.value_coef, where);
  c.max_grad_norm = get_or(j, "max_grad_norm", c.max_grad_norm, where);
  c.sil_weight = get_or(j, "sil_weight", c.sil_weight, where);
  c.sil_value_coef = get_or(j, "sil_value_coef", c.sil_value_coef, where);
  c.sil_capacity = get_or(j, "sil_capacity", c.sil_capacity, where);
  c.sil_batch = get_or(j, "sil_batch", c.sil_batch, where);
  c.sil_updates = get_or(j, "sil_updates", c.sil_updates, where);
  c.intervention_cost = get_or(j, "intervention_cost", c.intervention_cost, where);
  c.fee_rate = get_or(j, "fee_rate", c.fee_rate, where);
  c.reward_scale = get_or(j, "reward_scale", c.reward_scale, where);
  c.validate();
  return c;
}

}  // namespace

double StartPolicy::draw(Rng& rng, double lo, double hi) const {
  const double t = kind == Kind::fixed ? value : rng.normal(value, sigma);
  return std::clamp(t, lo, hi);
}

StartPolicy StartPolicy::from_json(const json& j) {
  StartPolicy p;
  if (j.is_number()) {
    p.value = j.get<double>();
    return p;
  }
  reject_unknown(j, {"type", "value", "mu", "sigma"}, "start_time_distribution");
  const auto type = get_or<std::string>(j, "type", "fixed", "start_time_distribution");
  if (type == "fixed") {
    p.value = get_or(j, "value", 0.0, "start_time_distribution");
  } else if (type == "normal") {
    p.kind = Kind::normal;
    p.value = get_or(j, "mu", 150.0, "start_time_distribution");
    p.sigma = get_or(j, "sigma", 30.0, "start_time_distribution");
    if (!(p.sigma >= 0.0)) throw ConfigError("start_time_distribution: sigma must be >= 0");
  } else {
    throw ConfigError("start_time_distribution: type must be 'fixed' or 'normal'");
  }
  if (p.value < 0.0) throw ConfigError("start_time_distribution: start must be >= 0");
  return p;
}

json StartPolicy::to_json() const {
  if (kind == Kind::fixed) return {{"type", "fixed"}, {"value", value}};
  return {{"type", "normal"}, {"mu", value}, {"sigma", sigma}};
}

std::optional<Direction> SideMix::draw(Rng& rng) const {
  const std::array<double, 3> w = {buy, sell, none};
  switch (rng.categorical(w, buy + sell + none)) {
    case 0:
      return Direction::buy;
    case 1:
      return Direction::sell;
    default:
      return std::nullopt;
  }
}

std::string_view to_string(RlMode m) { return m == RlMode::frl ? "fRL" : "uRL"; }

void ScenarioConfig::validate() const {
  if (name.empty()) throw ConfigError("scenario: name is required");
  if (seeds.empty()) throw ConfigError("scenario: at least one seed is required");
  if (!(warmup >= 0.0)) throw ConfigError("scenario: warmup_seconds must be >= 0");
  if (!(trading > 0.0)) throw ConfigError("scenario: trading_seconds must be positive");
  if (!(volume_scale > 0.0)) throw ConfigError("scenario: volume_scale must be positive");
  if (!(sample_interval > 0.0)) throw ConfigError("scenario: sample_interval must be positive");
  if (workers < 1) throw ConfigError("scenario: workers must be >= 1");
  if (twap) {
    twap->config.validate();
    if (twap->side_mix) {
      const auto& m = *twap->side_mix;
      if (m.buy < 0 || m.sell < 0 || m.none < 0 || !(m.buy + m.sell + m.none > 0)) {
        throw ConfigError("twap.side_mix: probabilities must be non-negative and not all zero");
      }
    }
  }
  if (rl) {
    if (!(rl->agent.period > 0.0)) throw ConfigError("rl: period must be positive");
    if (rl->agent.inventory_cap < 1 || rl->agent.order_size < 1) throw ConfigError("rl: cap and order size must be >= 1");
    if (rl->start < 0.0 || rl->start >= trading) throw ConfigError("rl: start must lie inside the trading period");
    if (rl->mode == RlMode::frl && !twap) throw ConfigError("rl: fRL mode needs a TWAP to supply the presence signal");
  }
  if (training.episodes < 1 || training.episodes_per_update < 1 || training.checkpoint_every < 1) {
    throw ConfigError("training: episode counts must be >= 1");
  }
  if (!(training.fixed_start_fraction >= 0.0 && training.fixed_start_fraction <= 1.0)) {
    throw ConfigError("training: fixed_start_fraction must be in [0,1]");
  }
  training.ppo.validate();
  if (evaluation.episodes < 1) throw ConfigError("evaluation: episodes must be >= 1");
}

ScenarioConfig ScenarioConfig::from_json(const json& j, const std::filesystem::path& base) {
  reject_unknown(j, {"name", "description", "seeds", "warmup_seconds", "trading_seconds", "hawkes", "exchange", "twap",
                     "rl", "training", "evaluation", "sample_interval", "write_logs", "workers"},
                 "scenario");
  ScenarioConfig c;
  c.raw = j;
  c.name = get_or<std::string>(j, "name", "", "scenario");
  if (j.contains("seeds")) {
    const auto& s = j.at("seeds");
    if (s.is_number_integer() && s.get<std::int64_t>() >= 0) {
      c.seeds = parse_seed_list(std::to_string(s.get<std::int64_t>()));
    } else if (s.is_array()) {
      for (const auto& v : s) {
        if (!v.is_number_integer() || v.get<std::int64_t>() < 0) throw ConfigError("scenario: seeds must be non-negative integers");
        c.seeds.push_back(v.get<std::uint64_t>());
      }
    } else {
      throw ConfigError("scenario: seeds must be a count or a list");
    }
  } else {
    c.seeds = {1};
  }
  c.warmup = get_or(j, "warmup_seconds", c.warmup, "scenario");
  c.trading = get_or(j, "trading_seconds", c.trading, "scenario");
  c.sample_interval = get_or(j, "sample_interval", c.sample_interval, "scenario");
  c.write_logs = get_or(j, "write_logs", c.write_logs, "scenario");
  c.workers = get_or(j, "workers", c.workers, "scenario");

  const json hawkes = j.value("hawkes", json::object());
  reject_unknown(hawkes, {"path", "volume_scale"}, "hawkes");
  c.hawkes_path = resolve_path(get_or<std::string>(hawkes, "path", "../hawkes_default.json", "hawkes"), base);
  c.volume_scale = get_or(hawkes, "volume_scale", 1.0, "hawkes");

  if (j.contains("exchange")) c.exchange = exchange_from_json(j.at("exchange"));

  if (j.contains("twap") && !j.at("twap").is_null()) {
    json t = j.at("twap");
    reject_unknown(t, {"side", "Q", "T", "window", "period", "start_time", "start_time_distribution",
                       "urgency_time_frac", "urgency_fill_frac", "side_mix"},
                   "twap");
    TwapSpec spec;
    if (t.contains("start_time_distribution")) {
      spec.start = StartPolicy::from_json(t.at("start_time_distribution"));
    } else {
      spec.start.value = get_or(t, "start_time", 0.0, "twap");
    }
    if (t.contains("side_mix")) {
      const json& m = t.at("side_mix");
      reject_unknown(m, {"buy", "sell", "none"}, "twap.side_mix");
      SideMix mix;
      mix.buy = get_or(m, "buy", mix.buy, "twap.side_mix");
      mix.sell = get_or(m, "sell", mix.sell, "twap.side_mix");
      mix.none = get_or(m, "none", mix.none, "twap.side_mix");
      spec.side_mix = mix;
    }
    t.erase("start_time_distribution");
    t.erase("side_mix");
    t["start_time"] = spec.start.value;
    try {
      spec.config = TwapConfig::from_json(t);
    } catch (const json::exception& e) {
      throw ConfigError(std::string("twap: ") + e.what());
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("twap: ") + e.what());
    }
    c.twap = spec;
  }

  if (j.contains("rl") && !j.at("rl").is_null()) {
    const json& r = j.at("rl");
    const std::string where = "rl";
    reject_unknown(r, {"mode", "period", "checkpoint", "start", "inventory_cap", "order_size", "stochastic",
                       "intervention_cost", "init_seed"},
                   where);
    RlSpec spec;
    const auto mode = get_or<std::string>(r, "mode", "uRL", where);
    if (mode == "uRL" || mode == "url") {
      spec.mode = RlMode::url;
    } else if (mode == "fRL" || mode == "frl") {
      spec.mode = RlMode::frl;
    } else {
      throw ConfigError("rl: mode must be uRL or fRL");
    }
    spec.agent.period = get_or(r, "period", spec.agent.period, where);
    spec.agent.inventory_cap = get_or(r, "inventory_cap", spec.agent.inventory_cap, where);
    spec.agent.order_size = get_or(r, "order_size", spec.agent.order_size, where);
    spec.agent.stochastic = get_or(r, "stochastic", spec.agent.stochastic, where);
    spec.agent.intervention_cost = get_or(r, "intervention_cost", spec.agent.intervention_cost, where);
    spec.start = get_or(r, "start", spec.start, where);
    spec.init_seed = get_or<std::uint64_t>(r, "init_seed", spec.init_seed, where);
    if (r.contains("checkpoint") && !r.at("checkpoint").is_null()) {
      spec.checkpoint = resolve_path(r.at("checkpoint").get<std::string>(), base);
    }
    c.rl = spec;
  }

  if (j.contains("training")) {
    const json& t = j.at("training");
    const std::string where = "training";
    reject_unknown(t, {"episodes", "episodes_per_update", "checkpoint_every", "fixed_start_fraction", "seed", "ppo"},
                   where);
    c.training.episodes = get_or(t, "episodes", c.training.episodes, where);
    c.training.episodes_per_update = get_or(t, "episodes_per_update", c.training.episodes_per_update, where);
    c.training.checkpoint_every = get_or(t, "checkpoint_every", c.training.checkpoint_every, where);
    c.training.fixed_start_fraction = get_or(t, "fixed_start_fraction", c.training.fixed_start_fraction, where);
    c.training.seed = get_or<std::uint64_t>(t, "seed", c.training.seed, where);
    if (t.contains("ppo")) c.training.ppo = ppo_from_json(t.at("ppo"));
  }
  if (c.rl) c.training.ppo.intervention_cost = c.rl->agent.intervention_cost;

  if (j.contains("evaluation")) {
    const json& e = j.at("evaluation");
    reject_unknown(e, {"episodes", "twap_start"}, "evaluation");
    c.evaluation.episodes = get_or(e, "episodes", c.evaluation.episodes, "evaluation");
    c.evaluation.twap_start = get_or(e, "twap_start", c.evaluation.twap_start, "evaluation");
  }
  c.validate();
  return c;
}

hawkes::HawkesParams ScenarioConfig::load_hawkes() const {
  auto p = hawkes::HawkesParams::load(hawkes_path);
  p.volume_scale = volume_scale;
  p.validate();
  return p;
}

std::uint64_t ScenarioConfig::hash() const {
  const std::string s = raw.dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (const unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

std::filesystem::path config_dir() {
  if (const char* env = std::getenv("HLOB_CONFIG_DIR"); env && *env) return env;
  return HLOB_CONFIG_DIR;
}

const std::vector<std::string>& scenario_registry() {
  static const std::vector<std::string> names = {
      "twap_alone_hpov", "twap_alone_rpov1", "twap_impact",  "url_solo",     "url_vs_rpov2",
      "url_vs_hpov",     "frl_train",        "frl_eval_buy", "frl_eval_sell", "market_only",
  };
  return names;
}

std::filesystem::path resolve_scenario(const std::string& name_or_path) {
  const std::filesystem::path direct(name_or_path);
  if (std::filesystem::is_regular_file(direct)) return direct;
  const auto registry = config_dir() / "scenarios" / (name_or_path + ".json");
  if (std::filesystem::is_regular_file(registry)) return registry;
  throw ConfigError("scenario '" + name_or_path + "' is neither a file nor a registry name");
}

ScenarioConfig load_scenario(const std::string& name_or_path) {
  const auto path = resolve_scenario(name_or_path);
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario file " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("scenario " + path.string() + ": " + e.what());
  }
  auto c = ScenarioConfig::from_json(j, path.parent_path());
  c.source = path;
  return c;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> out;
  if (text.empty()) throw ConfigError("seeds: empty specification");
  auto parse_one = [](const std::string& s) {
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) {
      throw ConfigError("seeds: '" + s + "' is not a non-negative integer");
    }
    return static_cast<std::uint64_t>(std::stoull(s));
  };
  if (text.find(',') == std::string::npos) {
    const auto n = parse_one(text);
    if (n == 0) throw ConfigError("seeds: count must be >= 1");
    for (std::uint64_t s = 1; s <= n; ++s) out.push_back(s);
    return out;
  }
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_one(item));
  return out;
}

}  // namespace hlob
