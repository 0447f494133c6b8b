#include "hlob/rl_policy.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "hlob/types.hpp"

namespace hlob::rl {

namespace {

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

std::vector<int> with_ends(int in, const std::vector<int>& hidden, std::optional<int> out) {
  std::vector<int> s{in};
  s.insert(s.end(), hidden.begin(), hidden.end());
  if (out) s.push_back(*out);
  return s;
}

void require_finite(const std::vector<double>& obs) {
  for (const double x : obs) {
    if (!std::isfinite(x)) throw ContractViolation("policy: non-finite observation feature");
  }
}

/// d(joint log-prob)/d(decision logit) and d/d(action logits).
void log_prob_grad(const Forward& f, bool intervene, int action, double scale, double& g_z,
                   std::array<double, kNumActions>& g_logits) {
  if (!intervene) {
    g_z += -f.p_intervene * scale;
    return;
  }
  g_z += (1.0 - f.p_intervene) * scale;
  for (int k = 0; k < kNumActions; ++k) {
    if (!f.mask[k]) continue;
    g_logits[k] += ((k == action ? 1.0 : 0.0) - f.probs[k]) * scale;
  }
}

void backprop(const PolicyParams& p, const Forward& f, double g_z, const std::array<double, kNumActions>& g_logits,
              double g_v, std::vector<double>& grad) {
  const double* v = p.values().data();
  double* g = grad.data();
  if (g_z != 0.0) p.decision_net().backward(v + p.decision_offset(), f.decision, &g_z, g + p.decision_offset());
  std::vector<double> g_trunk(static_cast<std::size_t>(p.trunk().output_size()), 0.0);
  p.policy_head().backward(v + p.policy_offset(), f.policy, g_logits.data(), g + p.policy_offset(), g_trunk.data());
  if (g_v != 0.0) p.value_head().backward(v + p.value_offset(), f.value, &g_v, g + p.value_offset(), g_trunk.data());
  p.trunk().backward(v + p.trunk_offset(), f.trunk, g_trunk.data(), g + p.trunk_offset());
}

void put_u32(std::ostream& out, std::uint32_t x) {
  for (int i = 0; i < 4; ++i) out.put(static_cast<char>((x >> (8 * i)) & 0xffU));
}

void put_u64(std::ostream& out, std::uint64_t x) {
  for (int i = 0; i < 8; ++i) out.put(static_cast<char>((x >> (8 * i)) & 0xffU));
}

std::uint64_t get_le(const unsigned char* b, int n) {
  std::uint64_t x = 0;
  for (int i = 0; i < n; ++i) x |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return x;
}

constexpr char kMagic[8] = {'H', 'L', 'O', 'B', 'P', 'O', 'L', 'Y'};

}  // namespace

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

std::vector<double> default_norm_scales() {
  // inventory, bid/ask offset from reference mid, spread, top/deep sizes,
  // imbalance, own top bid/ask, own stale volume, time fraction, rho.
  return {20.0, 10.0, 10.0, 5.0, 10.0, 10.0, 10.0, 10.0, 1.0, 5.0, 5.0, 5.0, 1.0, 1.0};
}

PolicyParams::PolicyParams(const Architecture& arch)
    : norm_scales(default_norm_scales()),
      arch_(arch),
      decision_(with_ends(arch.obs_dim, arch.hidden, 1)),
      trunk_(with_ends(arch.obs_dim, arch.hidden, std::nullopt), /*tanh_output=*/true),
      policy_head_({arch.hidden.empty() ? arch.obs_dim : arch.hidden.back(), arch.actions}),
      value_head_({arch.hidden.empty() ? arch.obs_dim : arch.hidden.back(), 1}) {
  if (arch.hidden.empty()) throw ConfigError("policy architecture needs at least one hidden layer");
  if (arch.actions != kNumActions) throw ConfigError("policy architecture must have 5 actions");
  if (static_cast<int>(norm_scales.size()) != arch.obs_dim) norm_scales.assign(arch.obs_dim, 1.0);
  values_.assign(decision_.param_count() + trunk_.param_count() + policy_head_.param_count() +
                     value_head_.param_count(),
                 0.0);
}

void PolicyParams::initialize(Rng& rng) {
  double* v = values_.data();
  decision_.initialize(v + decision_offset(), rng, 0.01);
  trunk_.initialize(v + trunk_offset(), rng, 1.0);
  policy_head_.initialize(v + policy_offset(), rng, 0.01);
  value_head_.initialize(v + value_offset(), rng, 1.0);
}

bool PolicyParams::operator==(const PolicyParams& o) const {
  if (!(arch_ == o.arch_) || rho_aware != o.rho_aware || norm_scales != o.norm_scales) return false;
  if (values_.size() != o.values_.size()) return false;
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (std::bit_cast<std::uint64_t>(values_[i]) != std::bit_cast<std::uint64_t>(o.values_[i])) return false;
  }
  return true;
}

void forward(const PolicyParams& p, const std::vector<double>& obs, const ActionMask& mask, Forward& out) {
  if (static_cast<int>(obs.size()) != p.arch().obs_dim) throw ContractViolation("policy: observation size mismatch");
  require_finite(obs);
  const double* v = p.values().data();
  p.decision_net().forward(v + p.decision_offset(), obs.data(), out.decision);
  out.decision_logit = p.decision_net().output(out.decision)[0];
  out.p_intervene = sigmoid(out.decision_logit);
  p.trunk().forward(v + p.trunk_offset(), obs.data(), out.trunk);
  const auto& h = p.trunk().output(out.trunk);
  p.policy_head().forward(v + p.policy_offset(), h.data(), out.policy);
  p.value_head().forward(v + p.value_offset(), h.data(), out.value);
  out.value_estimate = p.value_head().output(out.value)[0];
  out.mask = mask;
  if (!mask[static_cast<int>(MmAction::skip)]) throw ContractViolation("policy: skip must always be feasible");
  const auto& logits = p.policy_head().output(out.policy);
  double hi = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < kNumActions; ++k) {
    out.logits[k] = logits[k];
    if (mask[k]) hi = std::max(hi, logits[k]);
  }
  double z = 0.0;
  for (int k = 0; k < kNumActions; ++k) {
    out.probs[k] = mask[k] ? std::exp(logits[k] - hi) : 0.0;
    z += out.probs[k];
  }
  for (auto& q : out.probs) q /= z;
  if (!std::isfinite(out.p_intervene) || !std::isfinite(z)) throw ContractViolation("policy: non-finite output");
}

double decision_forward(const PolicyParams& p, const std::vector<double>& obs) {
  if (static_cast<int>(obs.size()) != p.arch().obs_dim) throw ContractViolation("policy: observation size mismatch");
  require_finite(obs);
  nn::Mlp::Cache c;
  p.decision_net().forward(p.values().data() + p.decision_offset(), obs.data(), c);
  return sigmoid(p.decision_net().output(c)[0]);
}

ActionProbs action_forward(const PolicyParams& p, const std::vector<double>& obs, const ActionMask& mask) {
  Forward f;
  forward(p, obs, mask, f);
  return f.probs;
}

double value_forward(const PolicyParams& p, const std::vector<double>& obs) {
  Forward f;
  forward(p, obs, kAllFeasible, f);
  return f.value_estimate;
}

double joint_log_prob(const Forward& f, bool intervene, int action) {
  if (!intervene) return -softplus(f.decision_logit);
  const double pa = f.probs[static_cast<std::size_t>(action)];
  if (!(pa > 0.0)) return -std::numeric_limits<double>::infinity();
  return -softplus(-f.decision_logit) + std::log(pa);
}

double joint_entropy(const Forward& f) {
  const double z = f.decision_logit;
  const double p = f.p_intervene;
  double h = p * softplus(-z) + (1.0 - p) * softplus(z);
  for (int k = 0; k < kNumActions; ++k) {
    if (f.mask[k] && f.probs[k] > 0.0) h -= f.probs[k] * std::log(f.probs[k]);
  }
  return h;
}

// ---------------------------------------------------------------------------

void PpoConfig::validate() const {
  if (!(clip > 0.0 && clip < 1.0)) throw ConfigError("ppo: clip must be in (0,1)");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("ppo: gamma must be in (0,1]");
  if (!(lambda > 0.0 && lambda <= 1.0)) throw ConfigError("ppo: lambda must be in (0,1]");
  if (!(learning_rate > 0.0)) throw ConfigError("ppo: learning rate must be positive");
  if (epochs < 1 || minibatch < 1) throw ConfigError("ppo: epochs and minibatch must be >= 1");
  if (fee_rate != 1e-4) throw ConfigError("ppo: liquidation fee is fixed at 1 bps");
  if (sil_capacity < 1 || sil_batch < 1 || sil_updates < 0) throw ConfigError("ppo: invalid SIL settings");
}

void compute_gae(const std::vector<double>& rewards, const std::vector<double>& values, const std::vector<bool>& dones,
                 double last_value, double gamma, double lambda, std::vector<double>& advantages,
                 std::vector<double>& returns) {
  const std::size_t n = rewards.size();
  if (values.size() != n || dones.size() != n) throw ContractViolation("gae: misaligned inputs");
  advantages.assign(n, 0.0);
  returns.assign(n, 0.0);
  double gae = 0.0;
  for (std::size_t t = n; t-- > 0;) {
    const double next_value = t + 1 < n ? values[t + 1] : last_value;
    const double live = dones[t] ? 0.0 : 1.0;
    const double delta = rewards[t] + gamma * next_value * live - values[t];
    gae = delta + gamma * lambda * live * gae;
    advantages[t] = gae;
    returns[t] = gae + values[t];
  }
}

void compute_gae(Trajectory& t, double gamma, double lambda) {
  std::vector<double> r, v, a, ret;
  std::vector<bool> d;
  for (const auto& s : t.samples) {
    r.push_back(s.reward);
    v.push_back(s.value);
    d.push_back(s.done);
  }
  compute_gae(r, v, d, 0.0, gamma, lambda, a, ret);
  for (std::size_t i = 0; i < t.samples.size(); ++i) {
    t.samples[i].advantage = a[i];
    t.samples[i].ret = ret[i];
  }
}

double clipped_surrogate(double ratio, double advantage, double eps) {
  const double clipped = std::clamp(ratio, 1.0 - eps, 1.0 + eps);
  return std::min(ratio * advantage, clipped * advantage);
}

double step_reward(double prev_mtm, double new_mtm, double liquidated_notional, bool intervened,
                   double intervention_cost, double fee_rate) {
  return (new_mtm - prev_mtm) - fee_rate * std::abs(liquidated_notional) - (intervened ? intervention_cost : 0.0);
}

PpoDiagnostics ppo_loss_and_grad(const PolicyParams& p, const std::vector<const Sample*>& batch, const PpoConfig& c,
                                 std::vector<double>& grad) {
  grad.assign(p.size(), 0.0);
  PpoDiagnostics d;
  if (batch.empty()) return d;
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  Forward f;
  for (const Sample* s : batch) {
    forward(p, s->obs, s->mask, f);
    const double logp = joint_log_prob(f, s->intervene, s->action);
    const double ratio = std::exp(logp - s->log_prob);
    const double a = s->advantage;
    const double clipped = std::clamp(ratio, 1.0 - c.clip, 1.0 + c.clip);
    const bool unclipped_active = ratio * a <= clipped * a;
    const double surrogate = std::min(ratio * a, clipped * a);
    const double v = f.value_estimate;
    const double value_loss = 0.5 * (v - s->ret) * (v - s->ret);
    const double entropy = joint_entropy(f);

    d.policy_loss += -surrogate * inv_n;
    d.value_loss += value_loss * inv_n;
    d.entropy += entropy * inv_n;
    d.mean_ratio += ratio * inv_n;
    if (ratio < 1.0 - c.clip || ratio > 1.0 + c.clip) d.clip_fraction += inv_n;

    double g_z = 0.0;
    std::array<double, kNumActions> g_logits{};
    // Policy term: d(-min(rA, clip(r)A))/d(log pi) = -rA on the unclipped branch.
    if (unclipped_active) log_prob_grad(f, s->intervene, s->action, -ratio * a * inv_n, g_z, g_logits);
    // Entropy bonus: loss -= c_e * H.
    const double p1 = f.p_intervene;
    g_z += c.entropy_coef * f.decision_logit * p1 * (1.0 - p1) * inv_n;
    double hc = 0.0;
    for (int k = 0; k < kNumActions; ++k) {
      if (f.mask[k] && f.probs[k] > 0.0) hc -= f.probs[k] * std::log(f.probs[k]);
    }
    for (int k = 0; k < kNumActions; ++k) {
      if (!f.mask[k] || !(f.probs[k] > 0.0)) continue;
      g_logits[k] += c.entropy_coef * f.probs[k] * (std::log(f.probs[k]) + hc) * inv_n;
    }
    const double g_v = c.value_coef * (v - s->ret) * inv_n;
    backprop(p, f, g_z, g_logits, g_v, grad);
  }
  d.loss = d.policy_loss + c.value_coef * d.value_loss - c.entropy_coef * d.entropy;
  d.samples = batch.size();
  return d;
}

SilDiagnostics sil_loss_and_grad(const PolicyParams& p, const std::vector<const SilEntry*>& batch, const PpoConfig& c,
                                 std::vector<double>& grad) {
  grad.assign(p.size(), 0.0);
  SilDiagnostics d;
  if (batch.empty()) return d;
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  Forward f;
  for (const SilEntry* e : batch) {
    forward(p, e->obs, e->mask, f);
    const double w = e->ret - f.value_estimate;
    if (!(w > 0.0)) continue;
    ++d.contributing;
    const double logp = joint_log_prob(f, e->intervene, e->action);
    d.loss += c.sil_weight * (-w * logp + 0.5 * c.sil_value_coef * w * w) * inv_n;
    double g_z = 0.0;
    std::array<double, kNumActions> g_logits{};
    log_prob_grad(f, e->intervene, e->action, -c.sil_weight * w * inv_n, g_z, g_logits);
    const double g_v = -c.sil_weight * c.sil_value_coef * w * inv_n;
    backprop(p, f, g_z, g_logits, g_v, grad);
  }
  return d;
}

SilBuffer::SilBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ConfigError("sil buffer capacity must be positive");
  entries_.reserve(capacity);
}

double SilBuffer::min_priority() const {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& e : entries_) m = std::min(m, e.priority);
  return m;
}

bool SilBuffer::insert(SilEntry entry, double value) {
  if (!(entry.ret > value)) return false;
  entry.priority = entry.ret - value;
  if (entries_.size() < capacity_) {
    entries_.push_back(std::move(entry));
    return true;
  }
  auto lowest = std::min_element(entries_.begin(), entries_.end(),
                                 [](const SilEntry& a, const SilEntry& b) { return a.priority < b.priority; });
  if (entry.priority <= lowest->priority) return false;
  *lowest = std::move(entry);
  return true;
}

std::vector<const SilEntry*> SilBuffer::sample(Rng& rng, std::size_t n) const {
  std::vector<const SilEntry*> out;
  if (entries_.empty()) return out;
  std::vector<double> cum(entries_.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    acc += entries_[i].priority;
    cum[i] = acc;
  }
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double u = rng.uniform() * acc;
    auto it = std::upper_bound(cum.begin(), cum.end(), u);
    if (it == cum.end()) --it;
    out.push_back(&entries_[static_cast<std::size_t>(it - cum.begin())]);
  }
  return out;
}

Adam::Adam(std::size_t n, double lr, double beta1, double beta2, double eps)
    : learning_rate(lr), beta1_(beta1), beta2_(beta2), eps_(eps), m_(n, 0.0), v_(n, 0.0) {}

void Adam::step(std::vector<double>& params, const std::vector<double>& grad) {
  if (params.size() != m_.size() || grad.size() != m_.size()) throw ContractViolation("adam: size mismatch");
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
    params[i] -= learning_rate * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
  }
}

double clip_grad_norm(std::vector<double>& grad, double max_norm) {
  const double norm = std::sqrt(std::inner_product(grad.begin(), grad.end(), grad.begin(), 0.0));
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (auto& g : grad) g *= s;
  }
  return norm;
}

// ---------------------------------------------------------------------------

void checkpoint_save(const PolicyParams& p, const std::filesystem::path& path) {
  nlohmann::json h;
  h["format"] = "hlob-policy";
  h["version"] = kCheckpointVersion;
  h["obs_dim"] = p.arch().obs_dim;
  h["hidden"] = p.arch().hidden;
  h["actions"] = p.arch().actions;
  h["layers"] = {{"decision", p.decision_net().sizes()},
                 {"trunk", p.trunk().sizes()},
                 {"policy_head", p.policy_head().sizes()},
                 {"value_head", p.value_head().sizes()}};
  h["norm_scales"] = p.norm_scales;
  h["rho_aware"] = p.rho_aware;
  h["param_count"] = p.size();
  const std::string header = h.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write checkpoint " + path.string());
  out.write(kMagic, sizeof(kMagic));
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(header.size()));
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  put_u64(out, p.size());
  for (const double x : p.values()) put_u64(out, std::bit_cast<std::uint64_t>(x));
  out.flush();
  if (!out) throw ConfigError("failed writing checkpoint " + path.string());
}

PolicyParams checkpoint_load(const std::filesystem::path& path, const std::optional<Architecture>& expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open checkpoint " + path.string());
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::string where = "checkpoint " + path.string() + ": ";
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw ConfigError(where + "bad magic or truncated header");
  }
  const auto version = static_cast<std::uint32_t>(get_le(bytes.data() + 8, 4));
  if (version != kCheckpointVersion) throw ConfigError(where + "unsupported version " + std::to_string(version));
  const auto header_len = static_cast<std::size_t>(get_le(bytes.data() + 12, 4));
  if (bytes.size() < 16 + header_len + 8) throw ConfigError(where + "truncated");
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(header_len));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(where + "corrupt header: " + e.what());
  }
  Architecture arch;
  try {
    arch.obs_dim = h.at("obs_dim").get<int>();
    arch.hidden = h.at("hidden").get<std::vector<int>>();
    arch.actions = h.at("actions").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(where + "incomplete header: " + e.what());
  }
  if (expected && !(arch == *expected)) throw ConfigError(where + "architecture does not match the requested one");
  PolicyParams p(arch);
  const auto& layers = h.at("layers");
  if (layers.at("decision").get<std::vector<int>>() != p.decision_net().sizes() ||
      layers.at("trunk").get<std::vector<int>>() != p.trunk().sizes() ||
      layers.at("policy_head").get<std::vector<int>>() != p.policy_head().sizes() ||
      layers.at("value_head").get<std::vector<int>>() != p.value_head().sizes()) {
    throw ConfigError(where + "layer shapes inconsistent with architecture");
  }
  const std::size_t count_at = 16 + header_len;
  const auto count = static_cast<std::size_t>(get_le(bytes.data() + count_at, 8));
  if (count != p.size() || h.at("param_count").get<std::size_t>() != count) {
    throw ConfigError(where + "parameter count mismatch");
  }
  if (bytes.size() != count_at + 8 + count * 8) throw ConfigError(where + "truncated or oversized parameter block");
  const unsigned char* data = bytes.data() + count_at + 8;
  for (std::size_t i = 0; i < count; ++i) p.values()[i] = std::bit_cast<double>(get_le(data + 8 * i, 8));
  p.norm_scales = h.at("norm_scales").get<std::vector<double>>();
  if (static_cast<int>(p.norm_scales.size()) != arch.obs_dim) throw ConfigError(where + "norm scale count mismatch");
  p.rho_aware = h.at("rho_aware").get<bool>();
  return p;
}

std::uint64_t params_hash(const PolicyParams& p) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const double x : p.values()) {
    const auto b = std::bit_cast<std::uint64_t>(x);
    for (int i = 0; i < 8; ++i) {
      h ^= (b >> (8 * i)) & 0xffU;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

}  // namespace hlob::rl
