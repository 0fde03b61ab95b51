#pragma once

#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/SVD>
#include <nlohmann/json.hpp>

#include "mol/core/errors.hpp"
#include "mol/core/rng.hpp"
#include "mol/core/types.hpp"

namespace mol {

enum class LinearReward { linear, quadratic };

// Order-k linear dynamics
//   O_{t+1} = sum_{i<k} (C_i O_{t-i} + E_i[:, A_{t-i}]) + noise * eps,  eps ~ N(0, I)
// with reward O_{t+1}[0] (linear) or -O_{t+1}[0]^2 (quadratic).
struct LinearHmdpConfig {
  int order = 1;
  int obs_dim = 1;
  int action_count = 3;
  std::vector<Matrix> coefficients;    // k matrices, obs_dim x obs_dim
  std::vector<Matrix> action_effects;  // k matrices, obs_dim x action_count
  double noise = 1.0;
  int horizon = 100;
  int burn_in = 50;
  LinearReward reward = LinearReward::linear;
  std::uint64_t seed = 0;

  // Sum of spectral norms; < 1 guarantees a stable recursion.
  double stability_norm() const {
    double s = 0;
    for (const auto& c : coefficients) s += Eigen::JacobiSVD<Matrix>(c).singularValues()(0);
    return s;
  }

  void validate() const {
    if (order < 1) throw ConfigError("linear-hmdp: order must be >= 1");
    if (obs_dim < 1 || action_count < 1) throw ConfigError("linear-hmdp: obs_dim and action_count must be >= 1");
    if (static_cast<int>(coefficients.size()) != order || static_cast<int>(action_effects.size()) != order) {
      throw ConfigError("linear-hmdp: need exactly one coefficient and one action-effect matrix per lag");
    }
    for (const auto& c : coefficients)
      if (c.rows() != obs_dim || c.cols() != obs_dim) throw ConfigError("linear-hmdp: coefficient shape");
    for (const auto& e : action_effects)
      if (e.rows() != obs_dim || e.cols() != action_count) throw ConfigError("linear-hmdp: action-effect shape");
    if (!(noise >= 0)) throw ConfigError("linear-hmdp: noise must be >= 0");
    if (horizon < 1 || burn_in < 0) throw ConfigError("linear-hmdp: horizon must be >= 1 and burn_in >= 0");
    if (!(stability_norm() < 1)) {
      throw ConfigError("linear-hmdp: unstable coefficients (sum of spectral norms " + std::to_string(stability_norm()) +
                        " >= 1)");
    }
  }
};

// Default generator of a given order: coordinate 0 carries the lag structure,
// the action shifts coordinate 0 by (-1, 0, +1) at lag 0. Order 1 uses C_0 = 0.5,
// order 2 adds C_1 = 0.6 on top of C_0 = 0.3, order k >= 3 puts 0.7 on the
// oldest lag and 0.2 on the newest.
inline LinearHmdpConfig linear_hmdp_preset(int order, int obs_dim = 1, LinearReward reward = LinearReward::linear) {
  if (order < 1) throw ConfigError("linear-hmdp: order must be >= 1");
  LinearHmdpConfig c;
  c.order = order;
  c.obs_dim = obs_dim;
  c.action_count = 3;
  c.reward = reward;
  c.coefficients.assign(order, Matrix::Zero(obs_dim, obs_dim));
  c.action_effects.assign(order, Matrix::Zero(obs_dim, 3));
  auto set_lag = [&](int lag, double v) { c.coefficients[lag].diagonal().setConstant(v); };
  if (order == 1) {
    set_lag(0, 0.5);
  } else if (order == 2) {
    set_lag(0, 0.3);
    set_lag(1, 0.6);
  } else {
    set_lag(0, 0.2);
    set_lag(order - 1, 0.7);
  }
  c.action_effects[0](0, 0) = -1;
  c.action_effects[0](0, 2) = 1;
  return c;
}

inline void to_json(nlohmann::json& j, const LinearHmdpConfig& c) {
  auto mat = [](const Matrix& m) {
    auto rows = nlohmann::json::array();
    for (int r = 0; r < m.rows(); ++r) {
      std::vector<double> row(m.cols());
      for (int k = 0; k < m.cols(); ++k) row[k] = m(r, k);
      rows.push_back(std::move(row));
    }
    return rows;
  };
  auto coef = nlohmann::json::array();
  auto eff = nlohmann::json::array();
  for (const auto& m : c.coefficients) coef.push_back(mat(m));
  for (const auto& m : c.action_effects) eff.push_back(mat(m));
  j = nlohmann::json{{"env", "linear-hmdp"},
                     {"order", c.order},
                     {"obs_dim", c.obs_dim},
                     {"action_count", c.action_count},
                     {"coefficients", coef},
                     {"action_effects", eff},
                     {"noise", c.noise},
                     {"horizon", c.horizon},
                     {"burn_in", c.burn_in},
                     {"reward", c.reward == LinearReward::linear ? "linear" : "quadratic"},
                     {"seed", c.seed}};
}

// Expected next observation given the last k observations (newest first) and
// the last k actions (newest first).
inline Vector linear_hmdp_mean(const LinearHmdpConfig& cfg, const std::vector<Vector>& obs_lags,
                               const std::vector<int>& action_lags) {
  Vector m = Vector::Zero(cfg.obs_dim);
  for (int i = 0; i < cfg.order; ++i) m += cfg.coefficients[i] * obs_lags[i] + cfg.action_effects[i].col(action_lags[i]);
  return m;
}

inline double linear_hmdp_reward(const LinearHmdpConfig& cfg, const Vector& next) {
  return cfg.reward == LinearReward::linear ? next(0) : -next(0) * next(0);
}

}  // namespace mol
