#include "hlob/hawkes.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <Eigen/Dense>

namespace hlob::hawkes {

namespace {

constexpr std::size_t N = kNumEventKinds;

Vector12 read_vector(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) throw ConfigError(std::string("hawkes params: missing key '") + key + "'");
  const auto& arr = j.at(key);
  if (!arr.is_array() || arr.size() != N) {
    throw ConfigError(std::string("hawkes params: '") + key + "' must have 12 entries");
  }
  Vector12 out{};
  for (std::size_t i = 0; i < N; ++i) out[i] = arr[i].get<double>();
  return out;
}

Matrix12 read_matrix(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) throw ConfigError(std::string("hawkes params: missing key '") + key + "'");
  const auto& rows = j.at(key);
  if (!rows.is_array() || rows.size() != N) {
    throw ConfigError(std::string("hawkes params: '") + key + "' must be 12x12");
  }
  Matrix12 out{};
  for (std::size_t i = 0; i < N; ++i) {
    if (!rows[i].is_array() || rows[i].size() != N) {
      throw ConfigError(std::string("hawkes params: '") + key + "' must be 12x12");
    }
    for (std::size_t k = 0; k < N; ++k) out[i][k] = rows[i][k].get<double>();
  }
  return out;
}

std::vector<std::vector<double>> to_nested(const Matrix12& m) {
  std::vector<std::vector<double>> out(N, std::vector<double>(N));
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t k = 0; k < N; ++k) out[i][k] = m[i][k];
  return out;
}

}  // namespace

void HawkesParams::validate() const {
  if (!(volume_scale > 0.0) || !std::isfinite(volume_scale)) {
    throw ConfigError("hawkes params: volume_scale must be positive");
  }
  for (std::size_t i = 0; i < N; ++i) {
    if (!(baseline[i] >= 0.0) || !std::isfinite(baseline[i])) {
      throw ConfigError("hawkes params: baseline must be finite and non-negative");
    }
    if (!(size_mean[i] >= 1.0) || !std::isfinite(size_mean[i])) {
      throw ConfigError("hawkes params: size_mean must be >= 1 for " +
                        std::string(to_string(kAllEventKinds[i])));
    }
    for (std::size_t k = 0; k < N; ++k) {
      if (!(excitation[i][k] >= 0.0) || !std::isfinite(excitation[i][k])) {
        throw ConfigError("hawkes params: alpha must be finite and non-negative");
      }
      if (!(decay[i][k] > 0.0) || !std::isfinite(decay[i][k])) {
        throw ConfigError("hawkes params: kappa must be finite and positive");
      }
    }
  }
  const auto st = stationarity_check(*this);
  if (!st.stationary) {
    std::ostringstream msg;
    msg << "hawkes params: not stationary (spectral radius " << st.spectral_radius << ")";
    throw ConfigError(msg.str());
  }
}

HawkesParams HawkesParams::from_json(const nlohmann::json& j) {
  HawkesParams p;
  p.baseline = read_vector(j, "baseline");
  p.excitation = read_matrix(j, "alpha");
  p.decay = read_matrix(j, "kappa");
  p.size_mean = read_vector(j, "size_mean");
  p.volume_scale = j.value("volume_scale", 1.0);
  p.validate();
  return p;
}

nlohmann::json HawkesParams::to_json() const {
  nlohmann::json j;
  std::vector<std::string> order;
  for (auto k : kAllEventKinds) order.emplace_back(to_string(k));
  j["event_order"] = order;
  j["baseline"] = baseline;
  j["alpha"] = excitation;
  j["kappa"] = decay;
  j["size_mean"] = size_mean;
  j["volume_scale"] = volume_scale;
  return j;
}

HawkesParams HawkesParams::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open hawkes params file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("hawkes params " + path.string() + ": " + e.what());
  }
  return from_json(j);
}

void HawkesParams::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << to_json().dump(2) << '\n';
}

HawkesParams HawkesParams::poisson(const Vector12& rates, const Vector12& size_means) {
  HawkesParams p;
  p.baseline = rates;
  p.size_mean = size_means;
  for (auto& row : p.decay) row.fill(1.0);
  return p;
}

Stationarity stationarity_check(const std::vector<std::vector<double>>& alpha,
                                const std::vector<std::vector<double>>& kappa) {
  const std::size_t n = alpha.size();
  if (n == 0 || kappa.size() != n) throw ConfigError("stationarity: matrices must be square and equal-sized");
  Eigen::MatrixXd branching(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    if (alpha[i].size() != n || kappa[i].size() != n) {
      throw ConfigError("stationarity: matrices must be square and equal-sized");
    }
    for (std::size_t k = 0; k < n; ++k) {
      if (alpha[i][k] < 0.0) throw ConfigError("stationarity: negative excitation entry");
      if (!(kappa[i][k] > 0.0)) throw ConfigError("stationarity: decay entries must be positive");
      branching(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = alpha[i][k] / kappa[i][k];
    }
  }
  Eigen::EigenSolver<Eigen::MatrixXd> solver(branching, /*computeEigenvectors=*/false);
  double radius = 0.0;
  for (Eigen::Index i = 0; i < solver.eigenvalues().size(); ++i) {
    radius = std::max(radius, std::abs(solver.eigenvalues()[i]));
  }
  return {radius < 1.0, radius};
}

Stationarity stationarity_check(const HawkesParams& params) {
  return stationarity_check(to_nested(params.excitation), to_nested(params.decay));
}

Vector12 stationary_rates(const HawkesParams& params) {
  Eigen::Matrix<double, 12, 12> m;
  Eigen::Matrix<double, 12, 1> mu;
  for (std::size_t i = 0; i < N; ++i) {
    mu(static_cast<Eigen::Index>(i)) = params.baseline[i] * params.volume_scale;
    for (std::size_t k = 0; k < N; ++k) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
          (i == k ? 1.0 : 0.0) - params.excitation[i][k] / params.decay[i][k];
    }
  }
  const Eigen::Matrix<double, 12, 1> rates = m.fullPivLu().solve(mu);
  Vector12 out{};
  for (std::size_t i = 0; i < N; ++i) out[i] = rates(static_cast<Eigen::Index>(i));
  return out;
}

void EventHistory::register_event(const HawkesParams& params, EventKind kind, double t) {
  if (t < last_time) throw ContractViolation("hawkes: event registered before last event time");
  const double dt = t - last_time;
  const std::size_t j = index_of(kind);
  for (std::size_t i = 0; i < N; ++i) {
    auto& row = accum[i];
    const auto& kappa = params.decay[i];
    if (dt > 0.0) {
      for (std::size_t k = 0; k < N; ++k) {
        if (row[k] != 0.0) row[k] *= std::exp(-kappa[k] * dt);
      }
    }
    row[j] += 1.0;
  }
  last_time = t;
  ++event_count;
}

Vector12 intensity_at(const HawkesParams& params, const EventHistory& history, double t) {
  if (t < history.last_time) throw ContractViolation("hawkes: intensity queried before last event time");
  const double dt = t - history.last_time;
  Vector12 out{};
  for (std::size_t i = 0; i < N; ++i) {
    double lam = params.baseline[i] * params.volume_scale;
    const auto& row = history.accum[i];
    for (std::size_t k = 0; k < N; ++k) {
      if (row[k] == 0.0 || params.excitation[i][k] == 0.0) continue;
      lam += params.excitation[i][k] * row[k] * std::exp(-params.decay[i][k] * dt);
    }
    out[i] = lam;
  }
  return out;
}

std::optional<Candidate> propose_next_event(const HawkesParams& params, const EventHistory& history,
                                            double t_now, Rng& rng, double t_limit) {
  if (t_now < history.last_time) throw ContractViolation("hawkes: proposal starts before last event time");
  double t = t_now;
  // Intensities only decay between events, so the current total dominates the
  // process until the next accepted point.
  Vector12 lam = intensity_at(params, history, t);
  double bound = std::accumulate(lam.begin(), lam.end(), 0.0);
  while (true) {
    if (!(bound > 0.0)) return std::nullopt;
    t += rng.exponential(bound);
    if (t > t_limit) return std::nullopt;
    lam = intensity_at(params, history, t);
    const double total = std::accumulate(lam.begin(), lam.end(), 0.0);
    if (rng.uniform() * bound < total) {
      const std::size_t k = rng.categorical(lam, total);
      return Candidate{t, kAllEventKinds[k]};
    }
    bound = total;
  }
}

MarketEvent simulate_next_event(const HawkesParams& params, EventHistory& history, double t_now,
                                Rng& rng) {
  const auto c = propose_next_event(params, history, t_now, rng);
  if (!c) throw ContractViolation("hawkes: process has zero intensity");
  MarketEvent ev{c->time, c->kind, sample_order_size(params, c->kind, rng)};
  history.register_event(params, ev.kind, ev.time);
  return ev;
}

int sample_order_size(const HawkesParams& params, EventKind kind, Rng& rng) {
  const double mean = params.size_mean[index_of(kind)];
  if (!(mean >= 1.0)) throw ConfigError("hawkes params: size_mean must be >= 1");
  return rng.geometric(mean);
}

}  // namespace hlob::hawkes
