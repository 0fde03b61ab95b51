#pragma once

#include <random>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "mol/core/errors.hpp"
#include "mol/core/rng.hpp"
#include "mol/core/types.hpp"

namespace mol {

struct TigerConfig {
  double listen_error = 0.15;
  double reward_tiger = -100;
  double reward_empty = 10;
  double reward_listen = -1;
  int horizon = 50;
  bool reveal_state = false;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(listen_error >= 0 && listen_error <= 0.5)) throw ConfigError("tiger: listen_error must be in [0, 0.5]");
    if (horizon < 1) throw ConfigError("tiger: horizon must be >= 1");
  }

  int obs_dim() const { return reveal_state ? 2 : 1; }
};

inline void to_json(nlohmann::json& j, const TigerConfig& c) {
  j = nlohmann::json{{"env", "tiger"},
                     {"listen_error", c.listen_error},
                     {"reward_tiger", c.reward_tiger},
                     {"reward_empty", c.reward_empty},
                     {"reward_listen", c.reward_listen},
                     {"horizon", c.horizon},
                     {"reveal_state", c.reveal_state},
                     {"seed", c.seed}};
}

namespace tiger {

enum State : int { left = 0, right = 1 };
enum Action : int { open_left = 0, open_right = 1, listen = 2 };

// Observation emitted after a door opens (nothing is heard).
inline constexpr double kSentinel = 0.5;

inline const std::vector<std::string>& action_names() {
  static const std::vector<std::string> names{"open-left", "open-right", "listen"};
  return names;
}

}  // namespace tiger

struct TigerStep {
  RowVector observation;
  double reward = 0;
  int next_state = 0;
};

inline RowVector tiger_observation(const TigerConfig& cfg, double heard, int state) {
  RowVector o(cfg.obs_dim());
  o(0) = heard;
  if (cfg.reveal_state) o(1) = state;
  return o;
}

inline RowVector tiger_initial_observation(const TigerConfig& cfg, int state) {
  return tiger_observation(cfg, tiger::kSentinel, state);
}

// Deterministic core: `flip` decides a listening error (flip < listen_error)
// and `reset` the new tiger position after a door opens (reset < 0.5 -> left).
inline TigerStep tiger_step(const TigerConfig& cfg, int state, int action, double flip, double reset) {
  if (state != tiger::left && state != tiger::right) throw std::invalid_argument("tiger_step: invalid hidden state");
  TigerStep out;
  switch (action) {
    case tiger::listen: {
      out.reward = cfg.reward_listen;
      out.next_state = state;
      const int heard = flip < cfg.listen_error ? 1 - state : state;
      out.observation = tiger_observation(cfg, heard, out.next_state);
      break;
    }
    case tiger::open_left:
    case tiger::open_right: {
      const bool tiger_door = (action == tiger::open_left) == (state == tiger::left);
      out.reward = tiger_door ? cfg.reward_tiger : cfg.reward_empty;
      out.next_state = reset < 0.5 ? tiger::left : tiger::right;
      out.observation = tiger_observation(cfg, tiger::kSentinel, out.next_state);
      break;
    }
    default:
      throw std::invalid_argument("tiger_step: invalid action " + std::to_string(action));
  }
  return out;
}

inline TigerStep tiger_step(const TigerConfig& cfg, int state, int action, rng::Engine& eng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double flip = u(eng);
  const double reset = u(eng);
  return tiger_step(cfg, state, action, flip, reset);
}

}  // namespace mol
