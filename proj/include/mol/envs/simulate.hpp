#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "mol/core/parallel.hpp"
#include "mol/core/rng.hpp"
#include "mol/data/transform.hpp"
#include "mol/data/types.hpp"
#include "mol/envs/linear_hmdp.hpp"
#include "mol/envs/policy.hpp"
#include "mol/envs/tiger.hpp"

namespace mol {

using EnvSpec = std::variant<TigerConfig, LinearHmdpConfig>;

inline nlohmann::json env_to_json(const EnvSpec& env) {
  return std::visit([](const auto& c) { return nlohmann::json(c); }, env);
}

inline std::vector<std::string> numbered_actions(int count) {
  std::vector<std::string> names;
  for (int a = 0; a < count; ++a) names.push_back(std::to_string(a));
  return names;
}

inline Episode tiger_episode(const TigerConfig& cfg, const Policy& policy, int horizon, rng::Engine& eng) {
  if (policy.action_count() != 3) throw std::invalid_argument("tiger: policy must have 3 actions");
  Episode ep;
  ep.observations.resize(horizon + 1, cfg.obs_dim());
  std::bernoulli_distribution coin(0.5);
  int state = coin(eng) ? tiger::right : tiger::left;
  ep.observations.row(0) = tiger_initial_observation(cfg, state);
  for (int t = 0; t < horizon; ++t) {
    const int a = policy.sample(ep.observations.row(t), eng);
    auto step = tiger_step(cfg, state, a, eng);
    ep.actions.push_back(a);
    ep.rewards.push_back(step.reward);
    ep.observations.row(t + 1) = step.observation;
    state = step.next_state;
  }
  return ep;
}

// How a linear-HMDP behavior policy sees the process: the lag-augmented
// observation of the given order (order 1: the raw observation).
struct PolicyInput {
  int order = 1;
  bool include_reward = true;
};

inline Episode linear_hmdp_episode(const LinearHmdpConfig& cfg, const Policy& policy, int horizon, rng::Engine& eng,
                                   PolicyInput input = {}) {
  if (policy.action_count() != cfg.action_count) throw std::invalid_argument("linear-hmdp: policy action count mismatch");
  const int k = cfg.order;
  const int d = cfg.obs_dim;
  const int na = cfg.action_count;
  // Leading zero history, then burn-in, then the recorded window.
  const int pad = std::max(k, input.order) - 1;
  const int total = pad + cfg.burn_in + horizon;
  std::vector<Vector> obs(total + 1, Vector::Zero(d));
  std::vector<int> actions(total, 0);
  std::vector<double> rewards(total, 0.0);
  std::normal_distribution<double> normal;
  std::uniform_int_distribution<int> uniform_action(0, na - 1);
  ObservationLayout layout{d, na, input.order, input.include_reward};
  RowVector view(layout.dim());
  for (int t = 0; t < total; ++t) {
    if (t < pad) {
      actions[t] = uniform_action(eng);
    } else {
      int col = 0;
      view.segment(col, d) = obs[t].transpose();
      col += d;
      for (int lag = 1; lag < input.order; ++lag) {
        if (input.include_reward) view(col++) = rewards[t - lag];
        view.segment(col, na) = onehot(actions[t - lag], na);
        col += na;
        view.segment(col, d) = obs[t - lag].transpose();
        col += d;
      }
      actions[t] = policy.sample(view, eng);
    }
    Vector mean = Vector::Zero(d);
    for (int i = 0; i < k; ++i) {
      if (t - i < 0) continue;
      mean += cfg.coefficients[i] * obs[t - i] + cfg.action_effects[i].col(actions[t - i]);
    }
    for (int j = 0; j < d; ++j) mean(j) += cfg.noise * normal(eng);
    obs[t + 1] = mean;
    rewards[t] = linear_hmdp_reward(cfg, mean);
  }
  Episode ep;
  const int start = total - horizon;
  ep.observations.resize(horizon + 1, d);
  for (int t = 0; t <= horizon; ++t) ep.observations.row(t) = obs[start + t].transpose();
  ep.actions.assign(actions.begin() + start, actions.end());
  ep.rewards.assign(rewards.begin() + start, rewards.end());
  return ep;
}

// Simulates `episodes` independent trajectories. Episode e draws from its own
// stream (seed, "episode", e), so the result does not depend on `workers`.
inline TrajectoryDataset simulate(const EnvSpec& env, const Policy& policy, int episodes, int horizon,
                                  std::uint64_t seed, unsigned workers = 1, PolicyInput input = {}) {
  if (episodes < 1) throw std::invalid_argument("simulate: n_episodes must be >= 1");
  if (horizon < 1) throw std::invalid_argument("simulate: horizon must be >= 1");
  std::visit([](const auto& c) { c.validate(); }, env);
  std::vector<Episode> out(episodes);
  parallel_for(static_cast<std::size_t>(episodes), workers, [&](std::size_t e) {
    auto eng = rng::stream(seed, "episode", e);
    if (const auto* tiger = std::get_if<TigerConfig>(&env)) {
      out[e] = tiger_episode(*tiger, policy, horizon, eng);
    } else {
      out[e] = linear_hmdp_episode(std::get<LinearHmdpConfig>(env), policy, horizon, eng, input);
    }
    out[e].id = std::to_string(e);
  });
  nlohmann::json meta{{"env", env_to_json(env)}, {"policy", policy.to_json()}, {"seed", seed},
                      {"episodes", episodes}, {"horizon", horizon}};
  // Labels are action indices so that they keep their order through CSV.
  if (std::holds_alternative<TigerConfig>(env)) meta["action_names"] = tiger::action_names();
  return TrajectoryDataset(std::move(out), numbered_actions(policy.action_count()), std::move(meta));
}

inline TrajectoryDataset linear_hmdp_simulate(const LinearHmdpConfig& cfg, const Policy& policy, int episodes,
                                              int horizon, std::uint64_t seed, unsigned workers = 1,
                                              PolicyInput input = {}) {
  return simulate(EnvSpec{cfg}, policy, episodes, horizon, seed, workers, input);
}

}  // namespace mol
