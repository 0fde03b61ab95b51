#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mol/cli/config.hpp"
#include "mol/core/errors.hpp"
#include "mol/core/parallel.hpp"
#include "mol/data/io.hpp"
#include "mol/data/transform.hpp"
#include "mol/envs/simulate.hpp"
#include "mol/markov/order_selection.hpp"
#include "mol/markov/test.hpp"
#include "mol/ope/dr.hpp"
#include "mol/rl/fitted.hpp"

namespace mol::cli {

// What a command produced: a JSON report, a human-readable table for stdout,
// and for `simulate` the dataset itself.
struct CommandOutput {
  json report;
  std::string table;
  std::optional<TrajectoryDataset> dataset;
};

namespace detail {

inline std::string fixed(double v, int precision = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

inline std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.insert(0, width - s.size(), ' ');
  return s;
}

inline TrajectoryDataset load(const RunConfig& c) {
  if (c.data.empty()) throw ConfigError("no dataset given (use --data or the 'data' key)");
  const std::filesystem::path path(c.data);
  if (!std::filesystem::exists(path)) throw DataError("data file '" + c.data + "' does not exist");
  return load_dataset(path, format_from_path(path), c.actions);
}

inline int single_order(const RunConfig& c) {
  if (!c.order) return 1;
  if (c.order->first != c.order->last) throw ConfigError("this command takes a single order, not a range");
  return c.order->first;
}

inline TestConfig test_config(const RunConfig& c) {
  TestConfig t = c.test.config;
  t.seed = c.seed;
  t.alpha = c.alpha;
  t.include_reward = c.include_reward;
  t.workers = c.workers;
  return t;
}

inline RlConfig rl_config(const RunConfig& c, std::string_view stream) {
  RlConfig r = c.rl.config;
  r.regressor.seed = rng::derive(c.seed ^ r.regressor.seed, stream);
  r.learner = learner_from_name(c.rl.learner, r.regressor);
  r.workers = c.workers;
  return r;
}

struct TargetPolicy {
  std::shared_ptr<const Policy> policy;
  std::optional<int> order;  // order the policy was trained at, when known
};

inline TargetPolicy target_policy(const RunConfig& c, int action_count) {
  if (c.policy.is_null()) throw ConfigError("no target policy (set 'policy' in the config)");
  if (c.policy.is_object() && c.policy.contains("file")) {
    if (c.policy.size() != 1) throw ConfigError("policy: 'file' must be the only key");
    const auto doc = read_json_file(c.policy.at("file").get<std::string>(), false);
    TargetPolicy t;
    if (doc.contains("policy")) {
      t.policy = parse_policy(doc.at("policy"), action_count);
      if (doc.contains("order")) t.order = doc.at("order").get<int>();
    } else {
      t.policy = parse_policy(doc, action_count);
    }
    return t;
  }
  return {parse_policy(c.policy, action_count), std::nullopt};
}

inline json action_frequencies(const TrajectoryDataset& ds) {
  std::vector<double> f(ds.action_count(), 0.0);
  for (const auto& ep : ds.episodes())
    for (int a : ep.actions) f[a] += 1;
  const double n = static_cast<double>(ds.transition_count());
  json j = json::object();
  for (int a = 0; a < ds.action_count(); ++a) j[ds.action_set()[a]] = n > 0 ? f[a] / n : 0.0;
  return j;
}

}  // namespace detail

inline CommandOutput cmd_simulate(const RunConfig& c) {
  const auto& s = c.simulate;
  auto policy = s.resolved_policy();
  auto ds = simulate(s.env, *policy, s.episodes, s.resolved_horizon(), c.seed, c.workers);
  double reward = 0;
  for (const auto& ep : ds.episodes())
    for (double r : ep.rewards) reward += r;
  CommandOutput out;
  out.report = {{"config", c.echo("simulate")},
                {"episodes", ds.episode_count()},
                {"horizon", s.resolved_horizon()},
                {"obs_dim", ds.obs_dim()},
                {"transitions", ds.transition_count()},
                {"mean_reward", reward / static_cast<double>(ds.transition_count())},
                {"action_frequencies", detail::action_frequencies(ds)}};
  if (ds.meta().contains("action_names")) out.report["action_names"] = ds.meta().at("action_names");
  out.table = "simulated " + std::to_string(ds.episode_count()) + " episodes x " +
              std::to_string(s.resolved_horizon()) + " steps\n";
  out.dataset.emplace(std::move(ds));
  return out;
}

inline CommandOutput cmd_test_markov(const RunConfig& c) {
  const auto ds = detail::load(c);
  const OrderRange orders = c.order.value_or(OrderRange{});
  const auto cfg = detail::test_config(c);
  CommandOutput out;
  out.report = {{"config", c.echo("test-markov")}, {"results", json::array()}};
  std::ostringstream table;
  table << "order  max_stat  threshold   p_value  reject\n";
  for (int k = orders.first; k <= orders.last; ++k) {
    const auto rep = markov_test(augment_order(ds, k, c.include_reward), cfg);
    auto j = rep.to_json();
    j.erase("config");
    out.report["results"].push_back(std::move(j));
    table << detail::pad(std::to_string(k), 5) << detail::pad(detail::fixed(rep.max_statistic), 10)
          << detail::pad(detail::fixed(rep.threshold), 11) << detail::pad(detail::fixed(rep.p_value), 10)
          << detail::pad(rep.reject ? "yes" : "no", 8) << '\n';
  }
  out.table = table.str();
  return out;
}

inline CommandOutput cmd_select_order(const RunConfig& c) {
  const auto ds = detail::load(c);
  const int max_order = c.order ? c.order->last : 3;
  const auto rep = select_order(ds, max_order, detail::test_config(c));
  CommandOutput out;
  out.report = rep.to_json();
  out.report["config"] = c.echo("select-order");
  std::ostringstream table;
  table << "order   p_value  reject\n";
  for (const auto& r : rep.tested) {
    table << detail::pad(std::to_string(r.order), 5) << detail::pad(detail::fixed(r.p_value), 10)
          << detail::pad(r.reject ? "yes" : "no", 8) << '\n';
  }
  table << "selected: " << out.report["verdict"].get<std::string>() << '\n';
  out.table = table.str();
  return out;
}

inline CommandOutput cmd_fqi(const RunConfig& c) {
  const int k = detail::single_order(c);
  const auto ds = augment_order(detail::load(c), k, c.include_reward);
  const auto result = fqi(ds, detail::rl_config(c, "fqi"));
  Matrix initial(ds.episode_count(), ds.obs_dim());
  for (std::size_t e = 0; e < ds.episode_count(); ++e) initial.row(e) = ds.episode(e).observations.row(0);
  const double value = state_values(*result.q, *result.policy, initial).mean();
  CommandOutput out;
  out.report = {{"config", c.echo("fqi")},
                {"order", k},
                {"include_reward", c.include_reward},
                {"action_set", ds.action_set()},
                {"fitted_initial_value", value},
                {"policy", result.policy->to_json()}};
  out.table = "fqi at order " + std::to_string(k) + ": fitted initial value " + detail::fixed(value) + "\n";
  return out;
}

inline CommandOutput cmd_fqe(const RunConfig& c) {
  const int k = detail::single_order(c);
  const auto ds = augment_order(detail::load(c), k, c.include_reward);
  const auto target = detail::target_policy(c, ds.action_count());
  if (target.order && *target.order != k) {
    throw ConfigError("policy was trained at order " + std::to_string(*target.order) + " but --order is " +
                      std::to_string(k));
  }
  const auto result = fqe(ds, *target.policy, detail::rl_config(c, "fqe"));
  CommandOutput out;
  out.report = {{"config", c.echo("fqe")}, {"order", k}, {"n_episodes", ds.episode_count()}, {"value", result.value}};
  out.table = "fqe at order " + std::to_string(k) + ": J = " + detail::fixed(result.value) + "\n";
  return out;
}

inline CommandOutput cmd_ope_ci(const RunConfig& c) {
  const int k = detail::single_order(c);
  const auto ds = augment_order(detail::load(c), k, c.include_reward);
  const auto target = detail::target_policy(c, ds.action_count());
  if (target.order && *target.order != k) {
    throw ConfigError("policy was trained at order " + std::to_string(*target.order) + " but --order is " +
                      std::to_string(k));
  }
  OpeConfig oc;
  oc.folds = c.ope.folds;
  oc.alpha = c.alpha;
  oc.method = c.ope.method;
  oc.rl = detail::rl_config(c, "ope");
  oc.behavior = c.ope.behavior;
  oc.seed = c.seed;
  const auto rep = dr_crossfit(ds, *target.policy, oc);
  CommandOutput out;
  out.report = rep.to_json();
  out.report["config"] = c.echo("ope-ci");
  out.report["order"] = k;
  out.table = method_name(rep.method) + " estimate " + detail::fixed(rep.estimate) + "  se " +
              detail::fixed(rep.standard_error) + "  ci [" + detail::fixed(rep.ci.lower) + ", " +
              detail::fixed(rep.ci.upper) + "]\n";
  return out;
}

// Monte Carlo rejection proportions of the Markov test per order. Replicate r
// simulates with seed derive(seed, "bench-data", r) and tests with
// derive(seed, "bench-test", r), so the result does not depend on workers.
inline CommandOutput cmd_bench(const RunConfig& c) {
  const auto& b = c.bench;
  const OrderRange orders = c.order.value_or(OrderRange{});
  const int R = c.bench_replications;
  const int width = orders.last - orders.first + 1;
  std::vector<std::vector<int>> reject(R, std::vector<int>(width, 0));
  auto policy = b.resolved_policy();
  parallel_for(static_cast<std::size_t>(R), c.workers, [&](std::size_t r) {
    auto ds = simulate(b.env, *policy, b.episodes, b.resolved_horizon(), rng::derive(rng::derive(c.seed, "bench-data"), r));
    auto cfg = detail::test_config(c);
    cfg.workers = 1;
    cfg.seed = rng::derive(rng::derive(c.seed, "bench-test"), r);
    for (int k = orders.first; k <= orders.last; ++k) {
      reject[r][k - orders.first] = markov_test(augment_order(ds, k, c.include_reward), cfg).reject ? 1 : 0;
    }
  });
  CommandOutput out;
  out.report = {{"config", c.echo("bench")}, {"replications", R}, {"results", json::array()}};
  std::ostringstream table;
  table << "order  rejections  proportion  +/-2se\n";
  for (int i = 0; i < width; ++i) {
    int count = 0;
    for (int r = 0; r < R; ++r) count += reject[r][i];
    const double p = static_cast<double>(count) / R;
    const double bar = 2 * std::sqrt(p * (1 - p) / R);
    out.report["results"].push_back({{"order", orders.first + i},
                                     {"rejections", count},
                                     {"proportion", p},
                                     {"error_bar", bar},
                                     {"interval", {std::max(0.0, p - bar), std::min(1.0, p + bar)}}});
    table << detail::pad(std::to_string(orders.first + i), 5) << detail::pad(std::to_string(count), 12)
          << detail::pad(detail::fixed(p), 12) << detail::pad(detail::fixed(bar), 8) << '\n';
  }
  out.table = table.str();
  return out;
}

inline CommandOutput run_command(const std::string& command, const RunConfig& c) {
  if (command == "simulate") return cmd_simulate(c);
  if (command == "test-markov") return cmd_test_markov(c);
  if (command == "select-order") return cmd_select_order(c);
  if (command == "fqi") return cmd_fqi(c);
  if (command == "fqe") return cmd_fqe(c);
  if (command == "ope-ci") return cmd_ope_ci(c);
  if (command == "bench") return cmd_bench(c);
  throw ConfigError("unknown command '" + command + "'");
}

}  // namespace mol::cli
