#pragma once

#include <cmath>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mol/core/errors.hpp"
#include "mol/data/types.hpp"
#include "mol/envs/policy.hpp"
#include "mol/regress/learner.hpp"

namespace mol {

inline constexpr double kProbabilityFloor = 0.01;

// Raises entries below `floor` to it and rescales the others so each row still
// sums to 1; repeats until no rescaled entry falls below the floor.
inline Matrix floor_probabilities(Matrix p, double floor = kProbabilityFloor) {
  const int na = static_cast<int>(p.cols());
  if (floor * na > 1) throw std::invalid_argument("floor_probabilities: floor too large for the action count");
  for (int i = 0; i < p.rows(); ++i) {
    std::vector<bool> fixed(na, false);
    for (;;) {
      double fixed_mass = 0, free_mass = 0;
      for (int a = 0; a < na; ++a) {
        if (fixed[a]) {
          fixed_mass += floor;
        } else {
          free_mass += p(i, a);
        }
      }
      bool changed = false;
      for (int a = 0; a < na; ++a) {
        if (fixed[a]) continue;
        const double scaled = free_mass > 0 ? p(i, a) * (1 - fixed_mass) / free_mass : (1 - fixed_mass);
        if (scaled < floor) {
          fixed[a] = true;
          changed = true;
        }
      }
      if (changed) continue;
      int free_count = 0;
      for (int a = 0; a < na; ++a) free_count += fixed[a] ? 0 : 1;
      for (int a = 0; a < na; ++a) {
        if (fixed[a]) {
          p(i, a) = floor;
        } else {
          p(i, a) = free_mass > 0 ? p(i, a) * (1 - fixed_mass) / free_mass : (1 - fixed_mass) / free_count;
        }
      }
      break;
    }
  }
  return p;
}

// Estimated P(A_t = a | O_t = o); outputs are floored probability rows.
class BehaviorModel {
 public:
  virtual ~BehaviorModel() = default;
  virtual int action_count() const = 0;
  virtual Matrix probabilities(const Matrix& observations) const = 0;
  virtual nlohmann::json describe() const = 0;
};

// A known policy used as the behavior model.
class KnownBehavior final : public BehaviorModel {
 public:
  explicit KnownBehavior(std::shared_ptr<const Policy> policy, double floor = kProbabilityFloor)
      : policy_(std::move(policy)), floor_(floor) {}
  int action_count() const override { return policy_->action_count(); }
  Matrix probabilities(const Matrix& obs) const override {
    return floor_probabilities(policy_->probabilities(obs), floor_);
  }
  nlohmann::json describe() const override { return {{"kind", "known"}, {"policy", policy_->to_json()}}; }

 private:
  std::shared_ptr<const Policy> policy_;
  double floor_;
};

// Action frequencies per exact observation value; observations not seen in
// training fall back to the marginal frequencies.
class TabularBehavior final : public BehaviorModel {
 public:
  TabularBehavior(std::map<std::vector<double>, std::vector<double>> cells, std::vector<double> marginal, double floor)
      : cells_(std::move(cells)), marginal_(std::move(marginal)), floor_(floor) {}

  int action_count() const override { return static_cast<int>(marginal_.size()); }

  Matrix probabilities(const Matrix& obs) const override {
    Matrix p(obs.rows(), action_count());
    std::vector<double> key(obs.cols());
    for (int i = 0; i < obs.rows(); ++i) {
      for (int j = 0; j < obs.cols(); ++j) key[j] = obs(i, j);
      auto it = cells_.find(key);
      const auto& row = it == cells_.end() ? marginal_ : it->second;
      for (int a = 0; a < action_count(); ++a) p(i, a) = row[a];
    }
    return floor_probabilities(std::move(p), floor_);
  }

  nlohmann::json describe() const override { return {{"kind", "tabular"}, {"cells", cells_.size()}}; }

 private:
  std::map<std::vector<double>, std::vector<double>> cells_;
  std::vector<double> marginal_;
  double floor_;
};

// Multinomial logistic regression on a random Fourier feature map, with
// action 0 as the reference class and an L2 penalty on non-intercept weights.
class LogisticBehavior final : public BehaviorModel {
 public:
  LogisticBehavior(std::shared_ptr<const Basis> basis, Matrix weights, double floor)
      : basis_(std::move(basis)), weights_(std::move(weights)), floor_(floor) {}

  int action_count() const override { return static_cast<int>(weights_.cols()) + 1; }

  static Matrix softmax(const Matrix& design, const Matrix& weights) {
    Matrix logits(design.rows(), weights.cols() + 1);
    logits.col(0).setZero();
    logits.rightCols(weights.cols()) = design * weights;
    Matrix p(logits.rows(), logits.cols());
    for (int i = 0; i < logits.rows(); ++i) {
      const double m = logits.row(i).maxCoeff();
      p.row(i) = (logits.row(i).array() - m).exp().matrix();
      p.row(i) /= p.row(i).sum();
    }
    return p;
  }

  Matrix design(const Matrix& obs) const {
    Matrix x(obs.rows(), basis_->size() + 1);
    x.col(0).setOnes();
    x.rightCols(basis_->size()) = basis_->expand(obs);
    return x;
  }

  Matrix probabilities(const Matrix& obs) const override {
    return floor_probabilities(softmax(design(obs), weights_), floor_);
  }

  nlohmann::json describe() const override { return {{"kind", "logistic"}, {"features", basis_->size()}}; }

 private:
  std::shared_ptr<const Basis> basis_;
  Matrix weights_;  // (1 + D) x (|A| - 1)
  double floor_;
};

struct BehaviorSpec {
  enum class Kind { logistic, tabular } kind = Kind::logistic;
  RegressorSpec features{50, std::nullopt, 1e-3, 0};  // feature map and L2 penalty for the logistic model
  double floor = kProbabilityFloor;
  int max_newton_steps = 50;

  void validate() const {
    features.validate();
    if (!(floor >= 0 && floor < 0.5)) throw ConfigError("behavior: floor must be in [0, 0.5)");
  }
};

inline void to_json(nlohmann::json& j, const BehaviorSpec& s) {
  j = nlohmann::json{{"kind", s.kind == BehaviorSpec::Kind::logistic ? "logistic" : "tabular"},
                     {"features", s.features},
                     {"floor", s.floor}};
}

namespace detail {

inline void check_action_coverage(const TrajectoryDataset& ds, const std::vector<int>& episodes,
                                  std::vector<double>& counts) {
  counts.assign(ds.action_count(), 0.0);
  for (int e : episodes)
    for (int a : ds.episode(e).actions) counts[a] += 1;
  for (int a = 0; a < ds.action_count(); ++a) {
    if (counts[a] == 0) throw DataError("fit_behavior: action '" + ds.action_set()[a] + "' never observed");
  }
}

inline Matrix logistic_newton(const Matrix& x, const std::vector<int>& y, int classes, double penalty, int max_steps) {
  const auto n = x.rows();
  const auto p = x.cols();
  const int k = classes - 1;
  Matrix w = Matrix::Zero(p, k);
  Matrix onehot_y = Matrix::Zero(n, k);
  for (Eigen::Index i = 0; i < n; ++i)
    if (y[i] > 0) onehot_y(i, y[i] - 1) = 1;
  const double lam = penalty * static_cast<double>(n);
  auto objective = [&](const Matrix& wt) {
    const Matrix prob = LogisticBehavior::softmax(x, wt);
    double ll = 0;
    for (Eigen::Index i = 0; i < n; ++i) ll += std::log(std::max(prob(i, y[i]), 1e-300));
    return -ll + 0.5 * lam * wt.bottomRows(p - 1).squaredNorm();
  };
  double current = objective(w);
  for (int step = 0; step < max_steps; ++step) {
    const Matrix prob = LogisticBehavior::softmax(x, w);
    const Matrix resid = prob.rightCols(k) - onehot_y;
    Matrix grad = x.transpose() * resid;
    grad.bottomRows(p - 1) += lam * w.bottomRows(p - 1);
    Matrix hess = Matrix::Zero(p * k, p * k);
    for (int a = 0; a < k; ++a) {
      for (int b = a; b < k; ++b) {
        Vector weight = -prob.col(a + 1).cwiseProduct(prob.col(b + 1));
        if (a == b) weight += prob.col(a + 1);
        const Matrix block = x.transpose() * weight.asDiagonal() * x;
        hess.block(a * p, b * p, p, p) = block;
        if (a != b) hess.block(b * p, a * p, p, p) = block.transpose();
      }
      for (Eigen::Index r = 1; r < p; ++r) hess(a * p + r, a * p + r) += lam;
      hess(a * p, a * p) += 1e-8 * static_cast<double>(n);
    }
    const Vector g = Eigen::Map<const Vector>(grad.data(), grad.size());
    const Vector delta = hess.ldlt().solve(g);
    const Matrix dw = Eigen::Map<const Matrix>(delta.data(), p, k);
    double t = 1;
    double next = objective(w - dw);
    while (next > current && t > 1e-6) {
      t /= 2;
      next = objective(w - t * dw);
    }
    if (next > current) break;
    w -= t * dw;
    const double gain = current - next;
    current = next;
    if (gain < 1e-10 * (1 + std::abs(current))) break;
  }
  return w;
}

}  // namespace detail

// Fits a behavior model on the transitions of the listed episodes (all
// episodes when empty).
inline std::shared_ptr<const BehaviorModel> fit_behavior(const TrajectoryDataset& ds, const BehaviorSpec& spec = {},
                                                         std::vector<int> episodes = {}) {
  spec.validate();
  if (episodes.empty())
    for (std::size_t e = 0; e < ds.episode_count(); ++e) episodes.push_back(static_cast<int>(e));
  std::vector<double> counts;
  detail::check_action_coverage(ds, episodes, counts);
  const int na = ds.action_count();
  if (spec.kind == BehaviorSpec::Kind::tabular) {
    std::map<std::vector<double>, std::vector<double>> cells;
    std::vector<double> key(ds.obs_dim());
    for (int e : episodes) {
      const auto& ep = ds.episode(e);
      for (int t = 0; t < ep.horizon(); ++t) {
        for (int j = 0; j < ds.obs_dim(); ++j) key[j] = ep.observations(t, j);
        auto& row = cells.try_emplace(key, std::vector<double>(na, 0.0)).first->second;
        row[ep.actions[t]] += 1;
      }
    }
    for (auto& [k, row] : cells) {
      double total = 0;
      for (double c : row) total += c;
      for (double& c : row) c /= total;
    }
    double total = 0;
    for (double c : counts) total += c;
    for (double& c : counts) c /= total;
    return std::make_shared<TabularBehavior>(std::move(cells), std::move(counts), spec.floor);
  }
  Eigen::Index n = 0;
  for (int e : episodes) n += ds.episode(e).horizon();
  Matrix obs(n, ds.obs_dim());
  std::vector<int> y;
  y.reserve(n);
  Eigen::Index r = 0;
  for (int e : episodes) {
    const auto& ep = ds.episode(e);
    for (int t = 0; t < ep.horizon(); ++t, ++r) {
      obs.row(r) = ep.observations.row(t);
      y.push_back(ep.actions[t]);
    }
  }
  auto basis = RandomFeatureRidge(spec.features).make_basis(obs);
  LogisticBehavior shell(basis, Matrix::Zero(basis->size() + 1, na - 1), spec.floor);
  const Matrix x = shell.design(obs);
  Matrix w = detail::logistic_newton(x, y, na, spec.features.penalty, spec.max_newton_steps);
  return std::make_shared<LogisticBehavior>(basis, std::move(w), spec.floor);
}

}  // namespace mol
