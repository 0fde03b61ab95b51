#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mol/core/errors.hpp"
#include "mol/envs/linear_hmdp.hpp"
#include "mol/envs/policy.hpp"
#include "mol/envs/simulate.hpp"
#include "mol/envs/tiger.hpp"
#include "mol/markov/test.hpp"
#include "mol/ope/behavior.hpp"
#include "mol/ope/dr.hpp"
#include "mol/regress/learner.hpp"
#include "mol/rl/fitted.hpp"
#include "mol/rl/qfunction.hpp"

namespace mol::cli {

using nlohmann::json;

// Inclusive range of Markov orders, written "k" or "a..b".
struct OrderRange {
  int first = 1;
  int last = 1;

  static OrderRange parse(const std::string& text) {
    auto number = [&](const std::string& s) {
      std::size_t used = 0;
      int v = 0;
      try {
        v = std::stoi(s, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != s.size()) throw ConfigError("order: cannot parse '" + text + "'");
      return v;
    };
    OrderRange r;
    const auto dots = text.find("..");
    if (dots == std::string::npos) {
      r.first = r.last = number(text);
    } else {
      r.first = number(text.substr(0, dots));
      r.last = number(text.substr(dots + 2));
    }
    if (r.first < 1 || r.last < r.first) throw ConfigError("order: need 1 <= first <= last, got '" + text + "'");
    return r;
  }

  static OrderRange from_json(const json& j) {
    if (j.is_number_integer()) return parse(std::to_string(j.get<long long>()));
    if (j.is_string()) return parse(j.get<std::string>());
    throw ConfigError("order: expected an integer or a string like \"1..3\"");
  }

  json to_json() const {
    if (first == last) return first;
    return std::to_string(first) + ".." + std::to_string(last);
  }
};

namespace detail {

inline void check_keys(const json& j, const std::string& section, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(section + ": expected an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items()) {
    if (!ok.count(key)) throw ConfigError(section + ": unknown key '" + key + "'");
  }
}

template <class T>
T get(const json& j, const char* key, const T& fallback, const std::string& section) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(section + "." + key + ": wrong type");
  }
}

inline Matrix matrix_from_json(const json& j, const std::string& what) {
  if (!j.is_array()) throw ConfigError(what + ": expected a matrix (array of rows)");
  const auto rows = static_cast<int>(j.size());
  const int cols = rows > 0 ? static_cast<int>(j.at(0).size()) : 0;
  Matrix m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    if (static_cast<int>(j.at(r).size()) != cols) throw ConfigError(what + ": ragged matrix");
    for (int c = 0; c < cols; ++c) m(r, c) = j.at(r).at(c).get<double>();
  }
  return m;
}

}  // namespace detail

inline RegressorSpec regressor_from_json(const json& j, const std::string& section, RegressorSpec spec = {}) {
  detail::check_keys(j, section, {"num_features", "bandwidth", "penalty", "seed"});
  spec.num_features = detail::get(j, "num_features", spec.num_features, section);
  spec.penalty = detail::get(j, "penalty", spec.penalty, section);
  spec.seed = detail::get(j, "seed", spec.seed, section);
  if (j.contains("bandwidth")) {
    const auto& b = j.at("bandwidth");
    if (b.is_string() && b.get<std::string>() == "median-heuristic") {
      spec.bandwidth.reset();
    } else if (b.is_number()) {
      spec.bandwidth = b.get<double>();
    } else {
      throw ConfigError(section + ".bandwidth: expected a number or \"median-heuristic\"");
    }
  }
  spec.validate();
  return spec;
}

inline std::shared_ptr<const Learner> learner_from_name(const std::string& name, const RegressorSpec& spec) {
  if (name == "random-feature-ridge") return std::make_shared<RandomFeatureRidge>(spec);
  if (name == "tabular-mean") return std::make_shared<TabularMean>();
  if (name == "constant-mean") return std::make_shared<ConstantMean>();
  throw ConfigError("unknown learner '" + name + "' (random-feature-ridge, tabular-mean, constant-mean)");
}

inline EnvSpec env_from_json(const json& j) {
  const std::string section = "env";
  if (!j.is_object() || !j.contains("env")) throw ConfigError("env: missing 'env' (tiger or linear-hmdp)");
  const auto kind = j.at("env").get<std::string>();
  if (kind == "tiger") {
    detail::check_keys(j, section,
                       {"env", "listen_error", "reward_tiger", "reward_empty", "reward_listen", "horizon", "reveal_state", "seed"});
    TigerConfig c;
    c.listen_error = detail::get(j, "listen_error", c.listen_error, section);
    c.reward_tiger = detail::get(j, "reward_tiger", c.reward_tiger, section);
    c.reward_empty = detail::get(j, "reward_empty", c.reward_empty, section);
    c.reward_listen = detail::get(j, "reward_listen", c.reward_listen, section);
    c.horizon = detail::get(j, "horizon", c.horizon, section);
    c.reveal_state = detail::get(j, "reveal_state", c.reveal_state, section);
    c.seed = detail::get(j, "seed", c.seed, section);
    c.validate();
    return c;
  }
  if (kind == "linear-hmdp") {
    detail::check_keys(j, section,
                       {"env", "order", "obs_dim", "action_count", "coefficients", "action_effects", "noise", "horizon",
                        "burn_in", "reward", "seed", "preset"});
    const int order = detail::get(j, "order", 1, section);
    const int obs_dim = detail::get(j, "obs_dim", 1, section);
    const auto reward_name = detail::get<std::string>(j, "reward", "linear", section);
    if (reward_name != "linear" && reward_name != "quadratic") throw ConfigError("env.reward: linear or quadratic");
    const auto reward = reward_name == "linear" ? LinearReward::linear : LinearReward::quadratic;
    LinearHmdpConfig c = linear_hmdp_preset(detail::get(j, "preset", order, section), obs_dim, reward);
    if (j.contains("preset") && j.contains("order") && j.at("order").get<int>() != c.order) {
      throw ConfigError("env: 'order' disagrees with 'preset'");
    }
    c.action_count = detail::get(j, "action_count", c.action_count, section);
    if (j.contains("coefficients")) {
      c.coefficients.clear();
      for (const auto& m : j.at("coefficients")) c.coefficients.push_back(detail::matrix_from_json(m, "env.coefficients"));
      c.order = static_cast<int>(c.coefficients.size());
    }
    if (j.contains("action_effects")) {
      c.action_effects.clear();
      for (const auto& m : j.at("action_effects")) c.action_effects.push_back(detail::matrix_from_json(m, "env.action_effects"));
    } else if (c.action_count != 3 || static_cast<int>(c.action_effects.size()) != c.order) {
      c.action_effects.assign(c.order, Matrix::Zero(c.obs_dim, c.action_count));
    }
    c.noise = detail::get(j, "noise", c.noise, section);
    c.horizon = detail::get(j, "horizon", c.horizon, section);
    c.burn_in = detail::get(j, "burn_in", c.burn_in, section);
    c.seed = detail::get(j, "seed", c.seed, section);
    c.validate();
    return c;
  }
  throw ConfigError("env: unknown kind '" + kind + "' (tiger or linear-hmdp)");
}

inline int env_action_count(const EnvSpec& env) {
  if (std::holds_alternative<TigerConfig>(env)) return 3;
  return std::get<LinearHmdpConfig>(env).action_count;
}

inline std::shared_ptr<const Policy> default_policy(const EnvSpec& env) {
  if (std::holds_alternative<TigerConfig>(env)) return std::make_shared<EpsilonListenPolicy>(0.8);
  return std::make_shared<UniformPolicy>(env_action_count(env));
}

inline std::shared_ptr<const Policy> parse_policy(const json& j, int action_count) {
  try {
    auto p = policy_from_json(j, action_count);
    if (p->action_count() != action_count) throw ConfigError("policy: action count does not match");
    return p;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("policy: ") + e.what());
  }
}

struct SimulateSection {
  EnvSpec env = TigerConfig{};
  std::shared_ptr<const Policy> policy;  // null: environment default
  int episodes = 100;
  int horizon = 0;                       // 0: the environment's horizon
  std::string format = "csv";

  int resolved_horizon() const {
    if (horizon > 0) return horizon;
    return std::visit([](const auto& c) { return c.horizon; }, env);
  }
  std::shared_ptr<const Policy> resolved_policy() const { return policy ? policy : default_policy(env); }

  json to_json() const {
    return {{"env", env_to_json(env)},
            {"policy", resolved_policy()->to_json()},
            {"episodes", episodes},
            {"horizon", resolved_horizon()},
            {"format", format}};
  }
};

inline SimulateSection simulate_from_json(const json& j, const std::string& section,
                                          std::initializer_list<const char*> extra = {}) {
  std::vector<const char*> keys{"env", "policy", "episodes", "horizon", "format"};
  keys.insert(keys.end(), extra.begin(), extra.end());
  if (!j.is_object()) throw ConfigError(section + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    if (std::find_if(keys.begin(), keys.end(), [&](const char* k) { return key == k; }) == keys.end()) {
      throw ConfigError(section + ": unknown key '" + key + "'");
    }
  }
  SimulateSection s;
  if (j.contains("env")) s.env = env_from_json(j.at("env"));
  if (j.contains("policy") && !j.at("policy").is_null()) s.policy = parse_policy(j.at("policy"), env_action_count(s.env));
  s.episodes = detail::get(j, "episodes", s.episodes, section);
  s.horizon = detail::get(j, "horizon", s.horizon, section);
  s.format = detail::get(j, "format", s.format, section);
  if (s.episodes < 1) throw ConfigError(section + ".episodes must be >= 1");
  if (s.horizon < 0) throw ConfigError(section + ".horizon must be >= 1");
  if (s.format != "csv" && s.format != "json") throw ConfigError(section + ".format: csv or json");
  return s;
}

struct RlSection {
  RlConfig config;
  std::string learner = "random-feature-ridge";

  json to_json() const {
    return {{"gamma", config.gamma}, {"iterations", config.iterations}, {"regressor", config.regressor},
            {"learner", learner}};
  }
};

inline RlSection rl_from_json(const json& j) {
  detail::check_keys(j, "rl", {"gamma", "iterations", "regressor", "learner"});
  RlSection s;
  s.config.gamma = detail::get(j, "gamma", s.config.gamma, "rl");
  s.config.iterations = detail::get(j, "iterations", s.config.iterations, "rl");
  if (j.contains("regressor")) s.config.regressor = regressor_from_json(j.at("regressor"), "rl.regressor");
  s.learner = detail::get(j, "learner", s.learner, "rl");
  s.config.learner = learner_from_name(s.learner, s.config.regressor);
  s.config.validate();
  return s;
}

struct OpeSection {
  int folds = 2;
  OpeMethod method = OpeMethod::dr;
  BehaviorSpec behavior;

  json to_json() const { return {{"folds", folds}, {"method", method_name(method)}, {"behavior", behavior}}; }
};

inline OpeSection ope_from_json(const json& j) {
  detail::check_keys(j, "ope", {"folds", "method", "behavior"});
  OpeSection s;
  s.folds = detail::get(j, "folds", s.folds, "ope");
  s.method = method_from_name(detail::get<std::string>(j, "method", "dr", "ope"));
  if (j.contains("behavior")) {
    const auto& b = j.at("behavior");
    detail::check_keys(b, "ope.behavior", {"kind", "features", "floor"});
    const auto kind = detail::get<std::string>(b, "kind", "logistic", "ope.behavior");
    if (kind == "logistic") {
      s.behavior.kind = BehaviorSpec::Kind::logistic;
    } else if (kind == "tabular") {
      s.behavior.kind = BehaviorSpec::Kind::tabular;
    } else {
      throw ConfigError("ope.behavior.kind: logistic or tabular");
    }
    if (b.contains("features")) s.behavior.features = regressor_from_json(b.at("features"), "ope.behavior.features", s.behavior.features);
    s.behavior.floor = detail::get(b, "floor", s.behavior.floor, "ope.behavior");
  }
  if (s.folds < 2) throw ConfigError("ope.folds must be >= 2");
  s.behavior.validate();
  return s;
}

struct TestSection {
  TestConfig config;

  json to_json() const {
    return {{"Q", config.max_gap}, {"J", config.forward_count}, {"L", config.backward_count},
            {"K", config.folds},   {"B", config.replications},  {"regressor", config.regressor}};
  }
};

inline TestSection test_from_json(const json& j) {
  detail::check_keys(j, "test", {"Q", "J", "L", "K", "B", "regressor"});
  TestSection s;
  auto& c = s.config;
  c.max_gap = detail::get(j, "Q", c.max_gap, "test");
  c.forward_count = detail::get(j, "J", c.forward_count, "test");
  c.backward_count = detail::get(j, "L", c.backward_count, "test");
  c.folds = detail::get(j, "K", c.folds, "test");
  c.replications = detail::get(j, "B", c.replications, "test");
  if (j.contains("regressor")) c.regressor = regressor_from_json(j.at("regressor"), "test.regressor");
  c.validate();
  return s;
}

// Fully resolved configuration of one invocation. `out` and `workers` are
// run-time plumbing and are not echoed into reports.
struct RunConfig {
  std::uint64_t seed = 0;
  double alpha = 0.05;
  std::optional<OrderRange> order;
  bool include_reward = true;  // reward lags in order-k augmentation
  std::string data;
  std::optional<std::vector<std::string>> actions;
  std::string log = "info";
  std::string out;
  unsigned workers = 1;

  SimulateSection simulate;
  TestSection test;
  RlSection rl;
  OpeSection ope;
  json policy;  // target policy for fqe / ope-ci: inline policy or {"file": path}
  SimulateSection bench;
  int bench_replications = 100;

  json echo(const std::string& command) const {
    json j{{"command", command}, {"seed", seed}, {"alpha", alpha}, {"log", log}};
    if (order) j["order"] = order->to_json();
    j["include_reward"] = include_reward;
    if (!data.empty()) j["data"] = data;
    if (actions) j["actions"] = *actions;
    if (command == "simulate") j["simulate"] = simulate.to_json();
    if (command == "test-markov" || command == "select-order" || command == "bench") j["test"] = test.to_json();
    if (command == "fqi" || command == "fqe" || command == "ope-ci") j["rl"] = rl.to_json();
    if (command == "fqe" || command == "ope-ci") j["policy"] = policy;
    if (command == "ope-ci") j["ope"] = ope.to_json();
    if (command == "bench") {
      j["bench"] = bench.to_json();
      j["bench"]["replications"] = bench_replications;
    }
    return j;
  }
};

inline RunConfig run_config_from_json(const json& j) {
  detail::check_keys(j, "config",
                     {"command", "seed", "alpha", "order", "include_reward", "data", "actions", "log", "out", "workers", "simulate", "test",
                      "rl", "ope", "policy", "bench"});
  RunConfig c;
  c.seed = detail::get(j, "seed", c.seed, "config");
  c.alpha = detail::get(j, "alpha", c.alpha, "config");
  if (j.contains("order")) c.order = OrderRange::from_json(j.at("order"));
  c.include_reward = detail::get(j, "include_reward", c.include_reward, "config");
  c.data = detail::get(j, "data", c.data, "config");
  if (j.contains("actions")) c.actions = detail::get<std::vector<std::string>>(j, "actions", {}, "config");
  c.log = detail::get(j, "log", c.log, "config");
  c.out = detail::get(j, "out", c.out, "config");
  c.workers = detail::get(j, "workers", c.workers, "config");
  if (j.contains("simulate")) c.simulate = simulate_from_json(j.at("simulate"), "simulate");
  if (j.contains("test")) c.test = test_from_json(j.at("test"));
  if (j.contains("rl")) c.rl = rl_from_json(j.at("rl"));
  if (!j.contains("rl")) c.rl.config.learner = learner_from_name(c.rl.learner, c.rl.config.regressor);
  if (j.contains("ope")) c.ope = ope_from_json(j.at("ope"));
  if (j.contains("policy")) c.policy = j.at("policy");
  if (j.contains("bench")) {
    c.bench = simulate_from_json(j.at("bench"), "bench", {"replications"});
    c.bench_replications = detail::get(j.at("bench"), "replications", c.bench_replications, "bench");
    if (c.bench_replications < 1) throw ConfigError("bench.replications must be >= 1");
  }
  if (!(c.alpha > 0 && c.alpha < 1)) throw ConfigError("alpha must be in (0, 1)");
  return c;
}

inline json read_json_file(const std::filesystem::path& path, bool data_file) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    const std::string msg = "cannot read '" + path.string() + "'";
    if (data_file) throw DataError(msg);
    throw ConfigError(msg);
  }
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return json::parse(buf.str());
  } catch (const json::parse_error& e) {
    const std::string msg = path.string() + ": " + e.what();
    if (data_file) throw DataError(msg);
    throw ConfigError(msg);
  }
}

}  // namespace mol::cli
