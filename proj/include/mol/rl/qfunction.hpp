#pragma once

#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mol/core/errors.hpp"
#include "mol/envs/policy.hpp"
#include "mol/regress/ridge.hpp"

namespace mol {

// Q(o, a) as one fitted regressor per action over the observation space.
class QFunction {
 public:
  explicit QFunction(std::vector<FittedRegressor> per_action) : models_(std::move(per_action)) {
    if (models_.empty()) throw std::invalid_argument("QFunction: need at least one action");
    for (const auto& m : models_) {
      if (m.output_dim() != 1 || m.input_dim() != models_.front().input_dim()) {
        throw std::invalid_argument("QFunction: per-action models must be scalar over the same inputs");
      }
    }
  }

  int action_count() const { return static_cast<int>(models_.size()); }
  int input_dim() const { return models_.front().input_dim(); }
  const FittedRegressor& model(int action) const { return models_.at(action); }

  // n x |A| matrix of Q values.
  Matrix values(const Matrix& observations) const {
    Matrix q(observations.rows(), action_count());
    for (int a = 0; a < action_count(); ++a) q.col(a) = models_[a].predict(observations).col(0);
    return q;
  }

  nlohmann::json to_json() const {
    auto arr = nlohmann::json::array();
    for (const auto& m : models_) arr.push_back(m.to_json());
    return {{"per_action", arr}};
  }

  static QFunction from_json(const nlohmann::json& j) {
    std::vector<FittedRegressor> models;
    for (const auto& m : j.at("per_action")) models.push_back(FittedRegressor::from_json(m));
    return QFunction(std::move(models));
  }

 private:
  std::vector<FittedRegressor> models_;
};

// argmax_a Q(o, a) as a deterministic policy; ties go to the lowest index.
class GreedyPolicy final : public Policy {
 public:
  explicit GreedyPolicy(std::shared_ptr<const QFunction> q) : q_(std::move(q)) {}

  int action_count() const override { return q_->action_count(); }
  const QFunction& q() const { return *q_; }

  std::vector<int> actions(const Matrix& observations) const {
    const Matrix q = q_->values(observations);
    std::vector<int> out(q.rows(), 0);
    for (int i = 0; i < q.rows(); ++i)
      for (int a = 1; a < q.cols(); ++a)
        if (q(i, a) > q(i, out[i])) out[i] = a;
    return out;
  }

  Matrix probabilities(const Matrix& observations) const override {
    const auto best = actions(observations);
    Matrix p = Matrix::Zero(observations.rows(), action_count());
    for (std::size_t i = 0; i < best.size(); ++i) p(i, best[i]) = 1.0;
    return p;
  }

  nlohmann::json to_json() const override { return {{"kind", "greedy-from-Q"}, {"q", q_->to_json()}}; }

 private:
  std::shared_ptr<const QFunction> q_;
};

// Any policy kind of this library from its JSON form.
inline std::shared_ptr<const Policy> policy_from_json(const nlohmann::json& j, int action_count) {
  if (auto p = basic_policy_from_json(j, action_count)) return p;
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "greedy-from-Q") {
    return std::make_shared<GreedyPolicy>(std::make_shared<QFunction>(QFunction::from_json(j.at("q"))));
  }
  if (kind == "leading-columns") {
    return std::make_shared<LeadingColumnsPolicy>(policy_from_json(j.at("inner"), action_count), j.at("columns").get<int>());
  }
  throw ConfigError("unknown policy kind '" + kind + "'");
}

}  // namespace mol
