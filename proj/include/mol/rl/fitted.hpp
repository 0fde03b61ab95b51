#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mol/core/errors.hpp"
#include "mol/core/parallel.hpp"
#include "mol/data/types.hpp"
#include "mol/envs/policy.hpp"
#include "mol/regress/learner.hpp"
#include "mol/rl/qfunction.hpp"

namespace mol {

struct RlConfig {
  double gamma = 0.9;
  int iterations = 50;
  RegressorSpec regressor;
  std::shared_ptr<const Learner> learner;  // overrides the random-feature ridge
  unsigned workers = 1;

  void validate() const {
    if (!(gamma > 0 && gamma < 1)) throw ConfigError("rl: gamma must be in (0, 1)");
    if (iterations < 1) throw ConfigError("rl: iterations must be >= 1");
    regressor.validate();
  }
};

inline void to_json(nlohmann::json& j, const RlConfig& c) {
  j = nlohmann::json{{"gamma", c.gamma}, {"iterations", c.iterations}, {"regressor", c.regressor}};
  if (c.learner) j["learner"] = c.learner->describe();
}

namespace detail {

// Transitions grouped by action, with every action's design evaluated at all
// next observations once, so each Bellman iteration is only a solve.
class BellmanDesign {
 public:
  BellmanDesign(const TrajectoryDataset& ds, const RlConfig& cfg) : actions_(ds.action_count()) {
    const auto n = static_cast<Eigen::Index>(ds.transition_count());
    const int d = ds.obs_dim();
    next_.resize(n, d);
    rewards_.resize(n);
    std::vector<Eigen::Index> counts(actions_, 0);
    rows_.resize(actions_);
    Matrix current(n, d);
    Eigen::Index r = 0;
    for (const auto& ep : ds.episodes()) {
      for (int t = 0; t < ep.horizon(); ++t, ++r) {
        current.row(r) = ep.observations.row(t);
        next_.row(r) = ep.observations.row(t + 1);
        rewards_(r) = ep.rewards[t];
        rows_[ep.actions[t]].push_back(r);
        ++counts[ep.actions[t]];
      }
    }
    std::string coverage;
    bool missing = false;
    for (int a = 0; a < actions_; ++a) {
      coverage += (a ? ", " : "") + ds.action_set()[a] + ": " + std::to_string(counts[a]);
      missing = missing || counts[a] == 0;
    }
    if (missing) throw DataError("action absent from dataset (coverage " + coverage + ")");
    RandomFeatureRidge default_learner(cfg.regressor);
    const Learner& learner = cfg.learner ? *cfg.learner : default_learner;
    prepared_.resize(actions_);
    next_design_.resize(actions_);
    parallel_for(static_cast<std::size_t>(actions_), cfg.workers, [&](std::size_t a) {
      Matrix x(rows_[a].size(), d);
      for (std::size_t i = 0; i < rows_[a].size(); ++i) x.row(i) = current.row(rows_[a][i]);
      prepared_[a] = std::make_unique<PreparedRidge>(learner.prepare(x, a + 1));
      next_design_[a] = prepared_[a]->design(next_);
    });
  }

  int action_count() const { return actions_; }
  const Matrix& next_observations() const { return next_; }
  const Vector& rewards() const { return rewards_; }

  // Fits Q(., a) to targets y (one per transition) for every action and
  // returns the models plus their values at all next observations.
  std::vector<FittedRegressor> fit(const Vector& y, Matrix& next_values, unsigned workers) const {
    std::vector<std::optional<FittedRegressor>> models(actions_);
    next_values.resize(next_.rows(), actions_);
    parallel_for(static_cast<std::size_t>(actions_), workers, [&](std::size_t a) {
      Matrix target(rows_[a].size(), 1);
      for (std::size_t i = 0; i < rows_[a].size(); ++i) target(i, 0) = y(rows_[a][i]);
      models[a].emplace(prepared_[a]->fit(target));
      next_values.col(a) = models[a]->predict_design(next_design_[a]).col(0);
    });
    std::vector<FittedRegressor> out;
    for (auto& m : models) out.push_back(std::move(*m));
    return out;
  }

 private:
  int actions_;
  Matrix next_;
  Vector rewards_;
  std::vector<std::vector<Eigen::Index>> rows_;
  std::vector<std::unique_ptr<PreparedRidge>> prepared_;
  std::vector<Matrix> next_design_;
};

inline Matrix initial_observations(const TrajectoryDataset& ds) {
  Matrix out(ds.episode_count(), ds.obs_dim());
  for (std::size_t e = 0; e < ds.episode_count(); ++e) out.row(e) = ds.episode(e).observations.row(0);
  return out;
}

}  // namespace detail

struct FqiResult {
  std::shared_ptr<const QFunction> q;
  std::shared_ptr<const GreedyPolicy> policy;
};

// Fitted Q-iteration from Q_0 = 0 for a fixed number of iterations.
inline FqiResult fqi(const TrajectoryDataset& ds, const RlConfig& cfg) {
  cfg.validate();
  detail::BellmanDesign design(ds, cfg);
  Matrix next = Matrix::Zero(design.next_observations().rows(), design.action_count());
  std::vector<FittedRegressor> models;
  for (int it = 0; it < cfg.iterations; ++it) {
    const Vector y = design.rewards() + cfg.gamma * next.rowwise().maxCoeff();
    models = design.fit(y, next, cfg.workers);
  }
  auto q = std::make_shared<const QFunction>(std::move(models));
  return {q, std::make_shared<const GreedyPolicy>(q)};
}

struct FqeResult {
  std::shared_ptr<const QFunction> q;
  double value = 0;  // mean over episodes of V(o_0)
};

inline Vector state_values(const QFunction& q, const Policy& policy, const Matrix& observations) {
  return (q.values(observations).cwiseProduct(policy.probabilities(observations))).rowwise().sum();
}

// Fitted Q-evaluation of `policy` from Q_0 = 0 for a fixed number of iterations.
inline FqeResult fqe(const TrajectoryDataset& ds, const Policy& policy, const RlConfig& cfg) {
  cfg.validate();
  if (policy.action_count() != ds.action_count()) throw std::invalid_argument("fqe: policy action count mismatch");
  detail::BellmanDesign design(ds, cfg);
  const Matrix probs = policy.probabilities(design.next_observations());
  Matrix next = Matrix::Zero(design.next_observations().rows(), design.action_count());
  std::vector<FittedRegressor> models;
  for (int it = 0; it < cfg.iterations; ++it) {
    const Vector y = design.rewards() + cfg.gamma * next.cwiseProduct(probs).rowwise().sum();
    models = design.fit(y, next, cfg.workers);
  }
  FqeResult out;
  out.q = std::make_shared<const QFunction>(std::move(models));
  out.value = state_values(*out.q, policy, detail::initial_observations(ds)).mean();
  return out;
}

}  // namespace mol
