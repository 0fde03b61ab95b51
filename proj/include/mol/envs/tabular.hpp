#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "mol/core/types.hpp"
#include "mol/envs/policy.hpp"
#include "mol/envs/tiger.hpp"

namespace mol {

// Finite MDP with exact tables. Row s of `observations` is the observation a
// dataset shows in state s, so observation-based policies can be evaluated.
struct TabularMdp {
  std::vector<Matrix> transitions;  // per action, S x S, rows sum to 1
  Matrix rewards;                   // S x A expected rewards
  Vector initial;                   // S
  Matrix observations;              // S x d

  int state_count() const { return static_cast<int>(rewards.rows()); }
  int action_count() const { return static_cast<int>(rewards.cols()); }

  void validate() const {
    const auto s = rewards.rows();
    if (static_cast<Eigen::Index>(transitions.size()) != rewards.cols()) throw std::invalid_argument("tabular mdp: action count mismatch");
    for (const auto& p : transitions) {
      if (p.rows() != s || p.cols() != s) throw std::invalid_argument("tabular mdp: transition shape");
      if ((p.array() < 0).any() || ((p.rowwise().sum().array() - 1).abs() > 1e-12).any())
        throw std::invalid_argument("tabular mdp: transition rows must be distributions");
    }
    if (initial.size() != s || std::abs(initial.sum() - 1) > 1e-12) throw std::invalid_argument("tabular mdp: initial distribution");
    if (observations.rows() != s) throw std::invalid_argument("tabular mdp: observation rows");
  }

  // S x A action probabilities of `policy` in each state.
  Matrix policy_table(const Policy& policy) const { return policy.probabilities(observations); }
};

// Fully observed tiger as a 2-state MDP (left, right). The observation of a
// state is (sentinel, state), matching the layout of revealed tiger data.
inline TabularMdp tabular_tiger_mdp(const TigerConfig& cfg) {
  if (!cfg.reveal_state) throw std::invalid_argument("tabular_tiger_mdp: requires reveal_state");
  cfg.validate();
  TabularMdp m;
  m.transitions.assign(3, Matrix::Constant(2, 2, 0.5));
  m.transitions[tiger::listen] = Matrix::Identity(2, 2);
  m.rewards.resize(2, 3);
  m.rewards << cfg.reward_tiger, cfg.reward_empty, cfg.reward_listen,
               cfg.reward_empty, cfg.reward_tiger, cfg.reward_listen;
  m.initial = Vector::Constant(2, 0.5);
  m.observations.resize(2, 2);
  m.observations << tiger::kSentinel, 0, tiger::kSentinel, 1;
  return m;
}

// Fully observed tiger on its 6 distinct observations (heard, state), heard in
// {0, 1, sentinel}. Any policy of the observation, including one that reacts
// to the noisy signal, has an exact value here. State index = 3 * state + h
// with h = 0, 1, 2 for heard = 0, 1, sentinel.
inline TabularMdp tabular_tiger_observation_mdp(const TigerConfig& cfg) {
  if (!cfg.reveal_state) throw std::invalid_argument("tabular_tiger_observation_mdp: requires reveal_state");
  cfg.validate();
  const double heard_value[3] = {0.0, 1.0, tiger::kSentinel};
  auto index = [](int state, int h) { return 3 * state + h; };
  TabularMdp m;
  m.transitions.assign(3, Matrix::Zero(6, 6));
  m.rewards.resize(6, 3);
  m.initial = Vector::Zero(6);
  m.observations.resize(6, 2);
  for (int s = 0; s < 2; ++s) {
    m.initial(index(s, 2)) = 0.5;
    for (int h = 0; h < 3; ++h) {
      const int i = index(s, h);
      m.observations.row(i) << heard_value[h], s;
      m.rewards(i, tiger::open_left) = s == tiger::left ? cfg.reward_tiger : cfg.reward_empty;
      m.rewards(i, tiger::open_right) = s == tiger::right ? cfg.reward_tiger : cfg.reward_empty;
      m.rewards(i, tiger::listen) = cfg.reward_listen;
      for (int a : {tiger::open_left, tiger::open_right}) {
        m.transitions[a](i, index(0, 2)) = 0.5;
        m.transitions[a](i, index(1, 2)) = 0.5;
      }
      m.transitions[tiger::listen](i, index(s, s)) += 1 - cfg.listen_error;
      m.transitions[tiger::listen](i, index(s, 1 - s)) += cfg.listen_error;
    }
  }
  return m;
}

}  // namespace mol
