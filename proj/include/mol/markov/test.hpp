#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mol/core/errors.hpp"
#include "mol/core/rng.hpp"
#include "mol/data/transform.hpp"
#include "mol/markov/bootstrap.hpp"
#include "mol/markov/features.hpp"
#include "mol/markov/nuisance.hpp"
#include "mol/markov/statistic.hpp"
#include "mol/regress/folds.hpp"
#include "mol/regress/learner.hpp"

namespace mol {

struct TestConfig {
  int max_gap = 6;         // Q
  int forward_count = 16;  // J
  int backward_count = 16; // L
  int folds = 3;           // K
  int replications = 2000; // B
  double alpha = 0.05;
  std::uint64_t seed = 0;
  RegressorSpec regressor;
  bool include_reward = true;  // reward lags in order-k augmentation
  unsigned workers = 1;
  // Optional replacements for the random-feature learner of either nuisance.
  std::shared_ptr<const Learner> forward_learner;
  std::shared_ptr<const Learner> backward_learner;

  void validate() const {
    if (max_gap < 2) throw ConfigError("test: Q must be >= 2");
    if (forward_count < 1 || backward_count < 1) throw ConfigError("test: J and L must be >= 1");
    if (folds < 2) throw ConfigError("test: K must be >= 2");
    if (replications < 1) throw ConfigError("test: B must be >= 1");
    if (!(alpha > 0 && alpha < 1)) throw ConfigError("test: alpha must be in (0, 1)");
    regressor.validate();
  }
};

inline void to_json(nlohmann::json& j, const TestConfig& c) {
  j = nlohmann::json{{"Q", c.max_gap},   {"J", c.forward_count}, {"L", c.backward_count},
                     {"K", c.folds},     {"B", c.replications},  {"alpha", c.alpha},
                     {"seed", c.seed},   {"regressor", c.regressor}, {"include_reward", c.include_reward}};
  if (c.forward_learner) j["forward_learner"] = c.forward_learner->describe();
  if (c.backward_learner) j["backward_learner"] = c.backward_learner->describe();
}

struct GapDiagnostic {
  int gap = 0;
  std::size_t tuples = 0;
  double max_statistic = 0;
};

struct MarkovTestReport {
  TestConfig config;
  int order = 1;
  int max_gap_used = 0;
  int folds_used = 0;
  StatisticArray statistics;
  Vector standard_errors;  // sd / sqrt(n_q) of each mean contribution
  double max_statistic = 0;
  std::size_t argmax = 0;
  double threshold = 0;
  double p_value = 1;
  bool reject = false;
  std::vector<GapDiagnostic> per_gap;
  std::vector<std::string> warnings;

  // Full statistic arrays are included only on request; they are large.
  nlohmann::json to_json(bool include_statistics = false) const {
    nlohmann::json j;
    j["config"] = config;
    j["seed"] = config.seed;
    j["order"] = order;
    j["max_gap_used"] = max_gap_used;
    j["folds_used"] = folds_used;
    j["max_statistic"] = max_statistic;
    const auto per = static_cast<std::size_t>(statistics.per_gap());
    if (per > 0) {
      std::size_t rest = argmax % per;
      const int c = static_cast<int>(rest % 4);
      rest /= 4;
      j["argmax"] = {{"q", statistics.gaps.at(argmax / per)},
                     {"j", rest / statistics.backward_count},
                     {"l", rest % statistics.backward_count},
                     {"component", std::array<const char*, 4>{"cc", "cs", "sc", "ss"}[c]}};
    }
    j["threshold"] = threshold;
    j["p_value"] = p_value;
    j["reject"] = reject;
    auto gaps = nlohmann::json::array();
    for (const auto& g : per_gap) gaps.push_back({{"q", g.gap}, {"tuples", g.tuples}, {"max_statistic", g.max_statistic}});
    j["per_gap"] = std::move(gaps);
    j["warnings"] = warnings;
    if (include_statistics) {
      j["statistics"] = std::vector<double>(statistics.values.data(), statistics.values.data() + statistics.values.size());
      j["standard_errors"] = std::vector<double>(standard_errors.data(), standard_errors.data() + standard_errors.size());
    }
    return j;
  }
};

namespace detail {

// Largest Q' <= Q with at least two gap-Q' tuples.
inline int feasible_max_gap(const TrajectoryDataset& ds, int requested) {
  int q = std::min(requested, ds.max_horizon());
  for (; q >= 2; --q) {
    std::size_t n = 0;
    for (const auto& ep : ds.episodes()) n += gap_tuple_count(ep.horizon(), q);
    if (n >= 2) break;
  }
  return q;
}

}  // namespace detail

// Everything the statistic is computed from: the standardized data, the
// folds, the frozen test functions and the cross-fitted nuisance models.
struct TestStages {
  TrajectoryDataset data;
  FoldAssignment folds;
  FeatureBank bank;
  NuisanceModels nuisances;
  int max_gap = 0;
  std::vector<std::string> warnings;
};

inline TestStages prepare_test(const TrajectoryDataset& raw, const TestConfig& config) {
  config.validate();
  std::vector<std::string> warnings;
  const int q = detail::feasible_max_gap(raw, config.max_gap);
  if (q < 2) throw DataError("markov_test: episodes are too short for any gap q >= 2");
  if (q < config.max_gap) {
    warnings.push_back("Q reduced from " + std::to_string(config.max_gap) + " to " + std::to_string(q) +
                       " to fit episode lengths");
  }
  const int episodes = static_cast<int>(raw.episode_count());
  if (episodes < 2) throw DataError("markov_test: cross-fitting needs at least 2 episodes");
  const int k = std::min(config.folds, episodes);
  if (k < config.folds) {
    warnings.push_back("K reduced from " + std::to_string(config.folds) + " to " + std::to_string(k) +
                       " (number of episodes)");
  }
  auto ds = standardize(raw).first;
  auto folds = make_folds(ds, k, rng::derive(config.seed, "folds"));
  auto bank =
      build_feature_bank(ds.layout(), config.forward_count, config.backward_count, rng::derive(config.seed, "features"));
  RegressorSpec spec = config.regressor;
  spec.seed = rng::derive(config.seed ^ spec.seed, "regressor");
  const RandomFeatureRidge default_learner(spec);
  const Learner& fwd = config.forward_learner ? *config.forward_learner : default_learner;
  const Learner& bwd = config.backward_learner ? *config.backward_learner : default_learner;
  auto nuisances = fit_nuisances(ds, bank, folds, fwd, bwd, rng::derive(config.seed, "nuisances"));
  return TestStages{std::move(ds), std::move(folds), std::move(bank), std::move(nuisances), q, std::move(warnings)};
}

// Tests whether `ds` is first-order Markov in its (possibly lag-augmented)
// observations. Stages: standardize, folds, feature bank, nuisances,
// contributions, aggregation, multiplier bootstrap.
inline MarkovTestReport markov_test(const TrajectoryDataset& raw, const TestConfig& config) {
  auto stages = prepare_test(raw, config);
  MarkovTestReport report;
  report.config = config;
  report.order = raw.layout().order;
  report.max_gap_used = stages.max_gap;
  report.folds_used = stages.folds.fold_count();
  report.warnings = std::move(stages.warnings);
  const auto table = statistic_contributions(stages.data, stages.bank, stages.nuisances, stages.folds, stages.max_gap);
  auto agg = aggregate_statistics(table);

  auto& s = agg.statistics;
  report.standard_errors.resize(s.values.size());
  const int per = s.per_gap();
  for (std::size_t gi = 0; gi < s.gaps.size(); ++gi) {
    const double root_n = std::sqrt(static_cast<double>(s.tuple_counts[gi]));
    report.standard_errors.segment(gi * per, per) = s.std_devs.segment(gi * per, per) / root_n;
    report.per_gap.push_back({s.gaps[gi], s.tuple_counts[gi], s.values.segment(gi * per, per).cwiseAbs().maxCoeff()});
  }
  Eigen::Index arg = 0;
  report.max_statistic = s.values.cwiseAbs().maxCoeff(&arg);
  report.argmax = static_cast<std::size_t>(arg);

  auto boot = multiplier_bootstrap(agg.episode_blocks, report.max_statistic, config.replications, config.alpha,
                                   rng::derive(config.seed, "bootstrap"), config.workers);
  report.threshold = boot.threshold;
  report.p_value = boot.p_value;
  report.reject = report.p_value <= config.alpha;
  for (auto& w : boot.warnings) report.warnings.push_back(std::move(w));
  report.statistics = std::move(s);
  return report;
}

}  // namespace mol
