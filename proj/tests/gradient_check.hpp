#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "hlob/rl_policy.hpp"
#include "hlob/rng.hpp"

namespace hlob::test {

struct GradientError {
  /// max_k |analytic_k - numeric_k| / max(|analytic_k|, |numeric_k|, floor)
  double max_relative = 0.0;
  /// ||analytic - numeric|| / ||numeric||
  double vector_relative = 0.0;
  std::size_t checked = 0;
};

/// Central differences of `loss` around `params`, compared with `analytic`.
/// `floor` keeps components that are zero in both from dividing by zero.
inline GradientError compare_gradient(std::vector<double>& params, const std::vector<double>& analytic,
                                      const std::function<double()>& loss, double step = 1e-6, double floor = 1e-6) {
  GradientError e;
  double diff2 = 0.0;
  double num2 = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    const double keep = params[k];
    params[k] = keep + step;
    const double up = loss();
    params[k] = keep - step;
    const double down = loss();
    params[k] = keep;
    const double numeric = (up - down) / (2.0 * step);
    const double d = std::abs(analytic[k] - numeric);
    e.max_relative = std::max(e.max_relative, d / std::max({std::abs(analytic[k]), std::abs(numeric), floor}));
    diff2 += d * d;
    num2 += numeric * numeric;
    ++e.checked;
  }
  e.vector_relative = num2 > 0.0 ? std::sqrt(diff2 / num2) : std::sqrt(diff2);
  return e;
}

/// Small randomized policy: 8 observation features, two hidden layers.
inline rl::PolicyParams small_policy(std::uint64_t seed) {
  rl::Architecture arch;
  arch.obs_dim = 8;
  arch.hidden = {6, 5};
  rl::PolicyParams p(arch);
  Rng rng(seed);
  p.initialize(rng);
  // Larger output weights than the near-uniform initialization, so the heads matter.
  for (auto& v : p.values()) v += 0.3 * (2.0 * rng.uniform() - 1.0);
  return p;
}

inline std::vector<double> random_obs(Rng& rng, int dim) {
  std::vector<double> x(static_cast<std::size_t>(dim));
  for (auto& v : x) v = 2.0 * rng.uniform() - 1.0;
  return x;
}

inline rl::ActionMask random_mask(Rng& rng) {
  rl::ActionMask m = rl::kAllFeasible;
  for (int k = 0; k < rl::kNumActions - 1; ++k) m[static_cast<std::size_t>(k)] = rng.uniform() < 0.75;
  return m;
}

enum class GradientPath { full, decision, action, value };

/// Samples whose behaviour log-probabilities sit near the current policy, so
/// ratios stay away from the clip kinks unless `clipped` is set.
inline std::vector<rl::Sample> random_samples(const rl::PolicyParams& p, Rng& rng, std::size_t n, GradientPath path,
                                              bool clipped) {
  std::vector<rl::Sample> out;
  rl::Forward f;
  for (std::size_t k = 0; k < n; ++k) {
    rl::Sample s;
    s.obs = random_obs(rng, p.arch().obs_dim);
    s.mask = random_mask(rng);
    s.intervene = path == GradientPath::decision ? false : (path == GradientPath::action ? true : rng.uniform() < 0.6);
    std::vector<int> feasible;
    for (int a = 0; a < rl::kNumActions; ++a) {
      if (s.mask[static_cast<std::size_t>(a)]) feasible.push_back(a);
    }
    s.action = feasible[static_cast<std::size_t>(rng.uniform() * static_cast<double>(feasible.size()))];
    rl::forward(p, s.obs, s.mask, f);
    const double logp = rl::joint_log_prob(f, s.intervene, s.action);
    const double shift = clipped ? (rng.uniform() < 0.5 ? 0.6 : -0.6) : 0.1 * (2.0 * rng.uniform() - 1.0);
    s.log_prob = logp + shift;
    s.advantage = path == GradientPath::value ? 0.0 : 2.0 * rng.uniform() - 1.0;
    s.ret = 2.0 * rng.uniform() - 1.0;
    out.push_back(std::move(s));
  }
  return out;
}

inline GradientError check_ppo_gradient(std::uint64_t seed, GradientPath path, bool clipped) {
  auto p = small_policy(seed);
  Rng rng(seed + 1000);
  const auto samples = random_samples(p, rng, 12, path, clipped);
  std::vector<const rl::Sample*> batch;
  for (const auto& s : samples) batch.push_back(&s);
  rl::PpoConfig c;
  if (path == GradientPath::value) c.entropy_coef = 0.0;
  if (path == GradientPath::decision || path == GradientPath::action) c.value_coef = 0.0;
  std::vector<double> grad;
  rl::ppo_loss_and_grad(p, batch, c, grad);
  std::vector<double> scratch;
  return compare_gradient(p.values(), grad, [&] { return rl::ppo_loss_and_grad(p, batch, c, scratch).loss; });
}

inline GradientError check_sil_gradient(std::uint64_t seed) {
  auto p = small_policy(seed);
  Rng rng(seed + 2000);
  std::vector<rl::SilEntry> entries;
  for (int k = 0; k < 12; ++k) {
    rl::SilEntry e;
    e.obs = random_obs(rng, p.arch().obs_dim);
    e.mask = random_mask(rng);
    e.intervene = rng.uniform() < 0.6;
    e.action = rl::kNumActions - 1;
    if (e.mask[0] && rng.uniform() < 0.5) e.action = 0;
    // Half clearly above the value estimate, half clearly below.
    e.ret = rl::value_forward(p, e.obs) + (k % 2 == 0 ? 0.5 + rng.uniform() : -0.5 - rng.uniform());
    entries.push_back(e);
  }
  std::vector<const rl::SilEntry*> batch;
  for (const auto& e : entries) batch.push_back(&e);
  rl::PpoConfig c;
  c.sil_value_coef = 0.5;
  std::vector<double> grad;
  rl::sil_loss_and_grad(p, batch, c, grad);
  // The imitation weight (R - V)+ is a constant of the objective: freeze it at
  // the base parameters and rebuild the loss from forward passes only.
  std::vector<double> weight;
  rl::Forward f;
  for (const auto* e : batch) {
    rl::forward(p, e->obs, e->mask, f);
    weight.push_back(std::max(0.0, e->ret - f.value_estimate));
  }
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  auto frozen = [&] {
    double loss = 0.0;
    for (std::size_t k = 0; k < batch.size(); ++k) {
      if (!(weight[k] > 0.0)) continue;
      rl::forward(p, batch[k]->obs, batch[k]->mask, f);
      const double logp = rl::joint_log_prob(f, batch[k]->intervene, batch[k]->action);
      const double gap = batch[k]->ret - f.value_estimate;
      loss += c.sil_weight * (-weight[k] * logp + 0.5 * c.sil_value_coef * gap * gap) * inv_n;
    }
    return loss;
  };
  return compare_gradient(p.values(), grad, frozen);
}

/// Random inserts into a small buffer; counts entries that break R > V at
/// insertion and evictions that did not remove the lowest priority.
struct SilAdmission {
  std::size_t inserts = 0;
  std::size_t admitted = 0;
  std::size_t violations = 0;
};

inline SilAdmission check_sil_admission(std::uint64_t seed, std::size_t n, std::size_t capacity) {
  rl::SilBuffer buffer(capacity);
  Rng rng(seed);
  SilAdmission r;
  for (std::size_t k = 0; k < n; ++k) {
    rl::SilEntry e;
    e.ret = 4.0 * rng.uniform() - 2.0;
    const double value = 4.0 * rng.uniform() - 2.0;
    const bool full = buffer.size() == buffer.capacity();
    const double lowest = buffer.min_priority();
    const bool ok = buffer.insert(e, value);
    ++r.inserts;
    const bool should = e.ret > value && (!full || e.ret - value > lowest);
    if (ok != should) ++r.violations;
    if (ok) ++r.admitted;
    if (buffer.size() > buffer.capacity()) ++r.violations;
    for (const auto& entry : buffer.entries()) {
      if (!(entry.priority > 0.0)) ++r.violations;
    }
    if (full && ok && buffer.min_priority() < lowest) ++r.violations;
  }
  return r;
}

}  // namespace hlob::test
