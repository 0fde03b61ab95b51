#pragma once

#include <cmath>
#include <map>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mol/core/errors.hpp"
#include "mol/core/rng.hpp"
#include "mol/core/types.hpp"

namespace mol {

// Stationary policy: a map from observation rows to action probabilities.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual int action_count() const = 0;
  // n x |A| matrix, one probability row per observation row.
  virtual Matrix probabilities(const Matrix& observations) const = 0;
  virtual nlohmann::json to_json() const = 0;

  RowVector probabilities(const RowVector& observation) const { return probabilities(Matrix(observation)).row(0); }

  int sample(const RowVector& observation, rng::Engine& eng) const {
    return sample_from(probabilities(observation), eng);
  }

  static int sample_from(const RowVector& probs, rng::Engine& eng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double x = u(eng);
    double acc = 0;
    for (int a = 0; a < probs.size(); ++a) {
      acc += probs(a);
      if (x < acc) return a;
    }
    // Round-off: fall back to the last action with positive mass.
    for (int a = static_cast<int>(probs.size()) - 1; a >= 0; --a)
      if (probs(a) > 0) return a;
    return 0;
  }
};

inline void check_probability_row(const std::vector<double>& row, int action_count, const std::string& what) {
  if (static_cast<int>(row.size()) != action_count) throw ConfigError(what + ": expected " + std::to_string(action_count) + " probabilities");
  double sum = 0;
  for (double p : row) {
    if (!(p >= 0)) throw ConfigError(what + ": negative probability");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError(what + ": probabilities must sum to 1");
}

class UniformPolicy final : public Policy {
 public:
  explicit UniformPolicy(int action_count) : count_(action_count) {
    if (count_ < 1) throw std::invalid_argument("UniformPolicy: need at least one action");
  }
  int action_count() const override { return count_; }
  Matrix probabilities(const Matrix& obs) const override {
    return Matrix::Constant(obs.rows(), count_, 1.0 / count_);
  }
  nlohmann::json to_json() const override { return {{"kind", "uniform-random"}, {"action_count", count_}}; }

 private:
  int count_;
};

// Tiger behavior: listen with probability `listen`, otherwise open a door
// uniformly. Actions are (open-left, open-right, listen).
class EpsilonListenPolicy final : public Policy {
 public:
  explicit EpsilonListenPolicy(double listen = 0.8) : listen_(listen) {
    if (!(listen >= 0 && listen <= 1)) throw ConfigError("epsilon-listen: listen probability must be in [0, 1]");
  }
  int action_count() const override { return 3; }
  double listen_probability() const { return listen_; }
  Matrix probabilities(const Matrix& obs) const override {
    Matrix p(obs.rows(), 3);
    p.col(0).setConstant((1 - listen_) / 2);
    p.col(1).setConstant((1 - listen_) / 2);
    p.col(2).setConstant(listen_);
    return p;
  }
  nlohmann::json to_json() const override { return {{"kind", "epsilon-listen"}, {"listen", listen_}}; }

 private:
  double listen_;
};

// Lookup table keyed on the exact value of one observation coordinate, with an
// optional default row for unlisted values.
class TabularPolicy final : public Policy {
 public:
  TabularPolicy(int coordinate, std::map<double, std::vector<double>> rows, int action_count,
                std::vector<double> fallback = {})
      : coordinate_(coordinate), rows_(std::move(rows)), count_(action_count), fallback_(std::move(fallback)) {
    if (coordinate_ < 0) throw ConfigError("tabular policy: coordinate must be >= 0");
    for (const auto& [key, row] : rows_) check_probability_row(row, count_, "tabular policy row " + std::to_string(key));
    if (!fallback_.empty()) check_probability_row(fallback_, count_, "tabular policy default row");
  }

  int action_count() const override { return count_; }
  int coordinate() const { return coordinate_; }

  Matrix probabilities(const Matrix& obs) const override {
    if (coordinate_ >= obs.cols()) throw std::invalid_argument("tabular policy: coordinate outside the observation");
    Matrix p(obs.rows(), count_);
    for (int i = 0; i < obs.rows(); ++i) {
      auto it = rows_.find(obs(i, coordinate_));
      const std::vector<double>* row = it != rows_.end() ? &it->second : (fallback_.empty() ? nullptr : &fallback_);
      if (!row) throw std::invalid_argument("tabular policy: no row for value " + std::to_string(obs(i, coordinate_)));
      for (int a = 0; a < count_; ++a) p(i, a) = (*row)[a];
    }
    return p;
  }

  nlohmann::json to_json() const override {
    auto table = nlohmann::json::array();
    for (const auto& [key, row] : rows_) table.push_back({{"value", key}, {"probabilities", row}});
    nlohmann::json j{{"kind", "tabular"}, {"coordinate", coordinate_}, {"action_count", count_}, {"table", table}};
    if (!fallback_.empty()) j["default"] = fallback_;
    return j;
  }

 private:
  int coordinate_;
  std::map<double, std::vector<double>> rows_;
  int count_;
  std::vector<double> fallback_;
};

// Applies an inner policy to the leading columns of each observation, e.g. a
// first-order policy run on lag-augmented observations.
class LeadingColumnsPolicy final : public Policy {
 public:
  LeadingColumnsPolicy(std::shared_ptr<const Policy> inner, int columns) : inner_(std::move(inner)), columns_(columns) {}
  int action_count() const override { return inner_->action_count(); }
  Matrix probabilities(const Matrix& obs) const override {
    if (obs.cols() < columns_) throw std::invalid_argument("leading-columns policy: observation too short");
    return inner_->probabilities(Matrix(obs.leftCols(columns_)));
  }
  nlohmann::json to_json() const override {
    return {{"kind", "leading-columns"}, {"columns", columns_}, {"inner", inner_->to_json()}};
  }

 private:
  std::shared_ptr<const Policy> inner_;
  int columns_;
};

// Builds the policy kinds defined in this header. Kinds that need fitted
// models (greedy-from-Q) are handled by rl::policy_from_json.
inline std::shared_ptr<const Policy> basic_policy_from_json(const nlohmann::json& j, int action_count) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "uniform-random") return std::make_shared<UniformPolicy>(j.value("action_count", action_count));
  if (kind == "epsilon-listen") return std::make_shared<EpsilonListenPolicy>(j.value("listen", 0.8));
  if (kind == "tabular") {
    std::map<double, std::vector<double>> rows;
    for (const auto& r : j.at("table")) rows[r.at("value").get<double>()] = r.at("probabilities").get<std::vector<double>>();
    return std::make_shared<TabularPolicy>(j.at("coordinate").get<int>(), std::move(rows),
                                           j.value("action_count", action_count),
                                           j.value("default", std::vector<double>{}));
  }
  return nullptr;
}

}  // namespace mol
