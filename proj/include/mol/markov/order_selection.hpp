#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mol/core/errors.hpp"
#include "mol/data/transform.hpp"
#include "mol/markov/test.hpp"

namespace mol {

struct OrderTestResult {
  int order = 0;
  double p_value = 1;
  bool reject = false;
  double max_statistic = 0;
  double threshold = 0;
};

struct OrderSelectionReport {
  std::vector<OrderTestResult> tested;
  std::optional<int> selected;  // nullopt: every tested order rejected
  int max_order = 0;
  double alpha = 0.05;
  std::vector<std::string> warnings;

  bool pomdp_suspect() const { return !selected; }

  nlohmann::json to_json() const {
    nlohmann::json j;
    auto rows = nlohmann::json::array();
    for (const auto& r : tested) {
      rows.push_back({{"order", r.order},
                      {"p_value", r.p_value},
                      {"reject", r.reject},
                      {"max_statistic", r.max_statistic},
                      {"threshold", r.threshold}});
    }
    j["tested"] = std::move(rows);
    j["selected_order"] = selected ? nlohmann::json(*selected) : nlohmann::json(nullptr);
    j["verdict"] = selected ? "order-" + std::to_string(*selected) + " MDP" : "POMDP-suspect";
    j["max_order"] = max_order;
    j["alpha"] = alpha;
    j["warnings"] = warnings;
    return j;
  }
};

// Forward selection of the Markov order: test k = 1, 2, ... on the lag-augmented
// data and stop at the first order that is not rejected.
inline OrderSelectionReport select_order(const TrajectoryDataset& ds, int max_order, const TestConfig& config) {
  if (max_order < 1) throw std::invalid_argument("select_order: K_max must be >= 1");
  config.validate();
  OrderSelectionReport out;
  out.max_order = max_order;
  out.alpha = config.alpha;
  for (int k = 1; k <= max_order; ++k) {
    std::optional<MarkovTestReport> result;
    try {
      result = markov_test(augment_order(ds, k, config.include_reward), config);
    } catch (const DataError& e) {
      out.warnings.push_back("search stopped before order " + std::to_string(k) + ": " + e.what());
      break;
    }
    const auto& rep = *result;
    for (const auto& w : rep.warnings) out.warnings.push_back("order " + std::to_string(k) + ": " + w);
    out.tested.push_back({k, rep.p_value, rep.reject, rep.max_statistic, rep.threshold});
    if (!rep.reject) {
      out.selected = k;
      break;
    }
  }
  return out;
}

}  // namespace mol
