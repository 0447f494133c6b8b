#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "hlob/nn.hpp"
#include "hlob/rng.hpp"

namespace hlob::rl {

/// Restricted market-making action set.
enum class MmAction : std::uint8_t { place_bid, place_ask, cancel_bid, cancel_ask, skip };
inline constexpr int kNumActions = 5;
inline constexpr int kObsDim = 14;

using ActionMask = std::array<bool, kNumActions>;
using ActionProbs = std::array<double, kNumActions>;

inline constexpr ActionMask kAllFeasible = {true, true, true, true, true};

struct Architecture {
  int obs_dim = kObsDim;
  std::vector<int> hidden = {64, 64};
  int actions = kNumActions;

  bool operator==(const Architecture&) const = default;
};

/// Decision network (intervene logit), action trunk with policy and value
/// heads, all stored in one flat array: [decision | trunk | policy head | value head].
class PolicyParams {
 public:
  PolicyParams() : PolicyParams(Architecture{}) {}
  explicit PolicyParams(const Architecture& arch);

  /// Randomized initialization; output layers are scaled down so the initial
  /// policy is close to uniform.
  void initialize(Rng& rng);

  const Architecture& arch() const { return arch_; }
  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }
  std::size_t size() const { return values_.size(); }

  const nn::Mlp& decision_net() const { return decision_; }
  const nn::Mlp& trunk() const { return trunk_; }
  const nn::Mlp& policy_head() const { return policy_head_; }
  const nn::Mlp& value_head() const { return value_head_; }

  std::size_t decision_offset() const { return 0; }
  std::size_t trunk_offset() const { return decision_.param_count(); }
  std::size_t policy_offset() const { return trunk_offset() + trunk_.param_count(); }
  std::size_t value_offset() const { return policy_offset() + policy_head_.param_count(); }

  /// Feature divisors applied by build_observation; persisted with the parameters.
  std::vector<double> norm_scales;
  /// Trained with the TWAP-presence signal visible.
  bool rho_aware = false;

  bool operator==(const PolicyParams& o) const;

 private:
  Architecture arch_;
  nn::Mlp decision_;
  nn::Mlp trunk_;
  nn::Mlp policy_head_;
  nn::Mlp value_head_;
  std::vector<double> values_;
};

std::vector<double> default_norm_scales();

/// Forward state for one observation; reused across calls to avoid allocation.
struct Forward {
  nn::Mlp::Cache decision;
  nn::Mlp::Cache trunk;
  nn::Mlp::Cache policy;
  nn::Mlp::Cache value;
  double decision_logit = 0.0;
  double p_intervene = 0.5;
  std::array<double, kNumActions> logits{};
  ActionProbs probs{};
  ActionMask mask = kAllFeasible;
  double value_estimate = 0.0;
};

void forward(const PolicyParams& p, const std::vector<double>& obs, const ActionMask& mask, Forward& out);

/// Probability of intervening, in (0, 1).
double decision_forward(const PolicyParams& p, const std::vector<double>& obs);
/// Masked categorical distribution over the action set; masked entries are 0.
ActionProbs action_forward(const PolicyParams& p, const std::vector<double>& obs, const ActionMask& mask = kAllFeasible);
double value_forward(const PolicyParams& p, const std::vector<double>& obs);

/// log P(decision, action) under the impulse factorization. `action` is ignored
/// when not intervening.
double joint_log_prob(const Forward& f, bool intervene, int action);

/// H(Bernoulli(p)) + H(categorical).
double joint_entropy(const Forward& f);

double sigmoid(double z);

// ---------------------------------------------------------------------------

struct PpoConfig {
  double clip = 0.2;
  double gamma = 0.99;
  double lambda = 0.95;
  double learning_rate = 3e-4;
  int epochs = 4;
  int minibatch = 256;
  double entropy_coef = 0.01;
  double value_coef = 0.5;
  double max_grad_norm = 0.5;
  double sil_weight = 1.0;
  double sil_value_coef = 0.01;
  int sil_capacity = 20000;
  int sil_batch = 256;
  int sil_updates = 4;
  /// Per-intervention cost, currency units.
  double intervention_cost = 1e-4;
  /// Liquidation fee as a fraction of notional (1 bps).
  double fee_rate = 1e-4;
  /// Multiplier applied to rewards before learning.
  double reward_scale = 100.0;

  void validate() const;
};

/// One recorded decision.
struct Sample {
  std::vector<double> obs;
  ActionMask mask = kAllFeasible;
  bool intervene = false;
  int action = static_cast<int>(MmAction::skip);
  double log_prob = 0.0;
  double value = 0.0;
  double reward = 0.0;
  bool done = false;
  double advantage = 0.0;
  double ret = 0.0;
};

struct Trajectory {
  std::vector<Sample> samples;
  double episode_return = 0.0;
};

/// Generalized advantage estimates and bootstrapped returns (advantage + value).
/// `dones[t]` marks the last step of an episode; no value bootstraps across it.
void compute_gae(const std::vector<double>& rewards, const std::vector<double>& values,
                 const std::vector<bool>& dones, double last_value, double gamma, double lambda,
                 std::vector<double>& advantages, std::vector<double>& returns);
void compute_gae(Trajectory& t, double gamma, double lambda);

/// min(r A, clip(r, 1 - eps, 1 + eps) A).
double clipped_surrogate(double ratio, double advantage, double eps);

/// Reward in currency: change in mark-to-market, minus the fee on liquidated
/// notional, minus the intervention cost.
double step_reward(double prev_mtm, double new_mtm, double liquidated_notional, bool intervened,
                   double intervention_cost, double fee_rate = 1e-4);

struct PpoDiagnostics {
  double loss = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double mean_ratio = 0.0;
  double clip_fraction = 0.0;
  std::size_t samples = 0;
};

/// Mean clipped-surrogate loss over `batch` (negated objective + value loss -
/// entropy bonus). Gradient is written (not accumulated) into grad.
PpoDiagnostics ppo_loss_and_grad(const PolicyParams& p, const std::vector<const Sample*>& batch,
                                 const PpoConfig& config, std::vector<double>& grad);

struct SilEntry {
  std::vector<double> obs;
  ActionMask mask = kAllFeasible;
  bool intervene = false;
  int action = static_cast<int>(MmAction::skip);
  double ret = 0.0;
  double priority = 0.0;
};

struct SilDiagnostics {
  double loss = 0.0;
  std::size_t contributing = 0;
};

/// Self-imitation loss: -(R - V)+ log pi(decision, action) + c/2 (R - V)+^2,
/// with (R - V)+ treated as a constant weight in the policy term. Averaged over batch.
SilDiagnostics sil_loss_and_grad(const PolicyParams& p, const std::vector<const SilEntry*>& batch,
                                 const PpoConfig& config, std::vector<double>& grad);

/// Bounded store of transitions whose return beat the value estimate.
class SilBuffer {
 public:
  explicit SilBuffer(std::size_t capacity);

  /// Admits only if ret > value; when full, replaces the lowest-priority entry
  /// if the newcomer has higher priority (ret - value).
  bool insert(SilEntry entry, double value);

  std::size_t size() const { return entries_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return entries_.empty(); }
  const std::vector<SilEntry>& entries() const { return entries_; }
  double min_priority() const;

  /// Priority-proportional draw with replacement.
  std::vector<const SilEntry*> sample(Rng& rng, std::size_t n) const;

 private:
  std::size_t capacity_;
  std::vector<SilEntry> entries_;
};

class Adam {
 public:
  Adam(std::size_t n, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  void step(std::vector<double>& params, const std::vector<double>& grad);
  double learning_rate = 3e-4;

 private:
  double beta1_;
  double beta2_;
  double eps_;
  std::uint64_t t_ = 0;
  std::vector<double> m_;
  std::vector<double> v_;
};

/// Scales grad in place so its L2 norm is at most max_norm; returns the pre-clip norm.
double clip_grad_norm(std::vector<double>& grad, double max_norm);

// ---------------------------------------------------------------------------

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Binary layout: 8-byte magic, u32 version, u32 header length, JSON header
/// (shapes, norm scales, rho flag, parameter count), u64 count, count doubles.
/// All integers and doubles little-endian.
void checkpoint_save(const PolicyParams& p, const std::filesystem::path& path);

/// Throws ConfigError on bad magic, version, truncation or header inconsistency.
/// If `expected` is given, refuses any other architecture.
PolicyParams checkpoint_load(const std::filesystem::path& path,
                             const std::optional<Architecture>& expected = std::nullopt);

/// FNV-1a of the parameter bit patterns.
std::uint64_t params_hash(const PolicyParams& p);

}  // namespace hlob::rl
