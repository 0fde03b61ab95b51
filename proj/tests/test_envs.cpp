#include <array>
#include <cmath>
#include <memory>
#include <random>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "mol/envs/linear_hmdp.hpp"
#include "mol/envs/policy.hpp"
#include "mol/envs/simulate.hpp"
#include "mol/envs/tabular.hpp"
#include "mol/envs/tiger.hpp"

namespace {

using mol::Matrix;
using mol::RowVector;
using mol::Vector;
namespace tiger = mol::tiger;

// ---- tiger ----

TEST(Tiger, OpeningTheTigerDoor) {
  auto s = mol::tiger_step(mol::TigerConfig{}, tiger::left, tiger::open_left, 0.9, 0.9);
  EXPECT_EQ(s.reward, -100);
  EXPECT_EQ(s.observation(0), tiger::kSentinel);
  EXPECT_EQ(s.next_state, tiger::right);
}

TEST(Tiger, OpeningTheEmptyDoor) {
  auto s = mol::tiger_step(mol::TigerConfig{}, tiger::left, tiger::open_right, 0.9, 0.1);
  EXPECT_EQ(s.reward, 10);
  EXPECT_EQ(s.observation(0), tiger::kSentinel);
  EXPECT_EQ(s.next_state, tiger::left);
  EXPECT_EQ(mol::tiger_step(mol::TigerConfig{}, tiger::right, tiger::open_left, 0.0, 0.0).reward, 10);
  EXPECT_EQ(mol::tiger_step(mol::TigerConfig{}, tiger::right, tiger::open_right, 0.0, 0.0).reward, -100);
}

TEST(Tiger, ListeningWithoutAndWithError) {
  mol::TigerConfig cfg;
  auto ok = mol::tiger_step(cfg, tiger::left, tiger::listen, 0.5, 0.0);
  EXPECT_EQ(ok.reward, -1);
  EXPECT_EQ(ok.observation(0), 0.0);
  EXPECT_EQ(ok.next_state, tiger::left);
  auto wrong = mol::tiger_step(cfg, tiger::left, tiger::listen, 0.1, 0.0);
  EXPECT_EQ(wrong.observation(0), 1.0);
  EXPECT_EQ(wrong.next_state, tiger::left);
}

TEST(Tiger, RevealAppendsState) {
  mol::TigerConfig cfg;
  cfg.reveal_state = true;
  auto s = mol::tiger_step(cfg, tiger::right, tiger::listen, 0.1, 0.0);
  ASSERT_EQ(s.observation.size(), 2);
  EXPECT_EQ(s.observation(0), 0.0);
  EXPECT_EQ(s.observation(1), 1.0);
}

TEST(Tiger, InvalidInputs) {
  mol::TigerConfig cfg;
  EXPECT_THROW(mol::tiger_step(cfg, tiger::left, 3, 0, 0), std::invalid_argument);
  EXPECT_THROW(mol::tiger_step(cfg, 2, tiger::listen, 0, 0), std::invalid_argument);
  cfg.listen_error = 0.9;
  EXPECT_THROW(cfg.validate(), mol::ConfigError);
  cfg.listen_error = -0.1;
  EXPECT_THROW(cfg.validate(), mol::ConfigError);
  cfg.listen_error = 0.5;
  EXPECT_NO_THROW(cfg.validate());
}

TEST(Tiger, ListenAccuracy) {
  mol::TigerConfig cfg;
  auto eng = mol::rng::stream(3);
  int state = tiger::left, correct = 0;
  const int steps = 100000;
  for (int i = 0; i < steps; ++i) {
    auto s = mol::tiger_step(cfg, state, tiger::listen, eng);
    if (s.observation(0) == state) ++correct;
    state = i % 2;
  }
  EXPECT_NEAR(correct / double(steps), 0.85, 0.01);
}

TEST(Tiger, RewardSupport) {
  auto ds = mol::simulate(mol::TigerConfig{}, mol::UniformPolicy(3), 50, 50, 1);
  std::set<double> seen;
  for (const auto& ep : ds.episodes()) seen.insert(ep.rewards.begin(), ep.rewards.end());
  EXPECT_EQ(seen, (std::set<double>{-100, -1, 10}));
}

TEST(Tiger, DoorReopeningRerandomizesUniformly) {
  mol::TigerConfig cfg;
  cfg.reveal_state = true;
  auto ds = mol::simulate(cfg, mol::UniformPolicy(3), 200, 50, 8);
  int opens = 0, lefts = 0;
  for (const auto& ep : ds.episodes())
    for (int t = 0; t < ep.horizon(); ++t) {
      if (ep.actions[t] == tiger::listen) {
        EXPECT_EQ(ep.observations(t + 1, 1), ep.observations(t, 1));
        EXPECT_NE(ep.observations(t + 1, 0), tiger::kSentinel);
      } else {
        ++opens;
        EXPECT_EQ(ep.observations(t + 1, 0), tiger::kSentinel);
        if (ep.observations(t + 1, 1) == 0) ++lefts;
      }
    }
  EXPECT_NEAR(lefts / double(opens), 0.5, 4 * 0.5 / std::sqrt(opens));
}

// ---- simulate ----

TEST(Simulate, ShapesAndMetadata) {
  auto ds = mol::simulate(mol::TigerConfig{}, mol::EpsilonListenPolicy(), 3, 5, 1);
  ASSERT_EQ(ds.episode_count(), 3u);
  for (const auto& ep : ds.episodes()) {
    EXPECT_EQ(ep.horizon(), 5);
    EXPECT_EQ(ep.observations.cols(), 1);
    EXPECT_EQ(ep.observations(0, 0), tiger::kSentinel);
  }
  EXPECT_EQ(ds.action_set(), (std::vector<std::string>{"0", "1", "2"}));
  EXPECT_EQ(ds.meta()["env"]["env"], "tiger");
  EXPECT_EQ(ds.meta()["action_names"][2], "listen");
  EXPECT_EQ(ds.meta()["policy"]["kind"], "epsilon-listen");
  EXPECT_EQ(ds.meta()["seed"], 1);
}

TEST(Simulate, DeterministicAndWorkerIndependent) {
  const auto env = mol::linear_hmdp_preset(2);
  const mol::UniformPolicy pi(3);
  auto a = mol::linear_hmdp_simulate(env, pi, 12, 20, 5, 1);
  auto b = mol::linear_hmdp_simulate(env, pi, 12, 20, 5, 4);
  auto c = mol::linear_hmdp_simulate(env, pi, 12, 20, 6, 1);
  for (std::size_t e = 0; e < a.episode_count(); ++e) {
    EXPECT_EQ(a.episode(e).observations, b.episode(e).observations);
    EXPECT_EQ(a.episode(e).actions, b.episode(e).actions);
    EXPECT_EQ(a.episode(e).rewards, b.episode(e).rewards);
  }
  EXPECT_NE(a.episode(0).observations, c.episode(0).observations);
}

TEST(Simulate, UniformPolicyListenFrequency) {
  auto ds = mol::simulate(mol::TigerConfig{}, mol::UniformPolicy(3), 100, 100, 2);
  int listens = 0;
  for (const auto& ep : ds.episodes())
    for (int a : ep.actions) listens += a == tiger::listen;
  EXPECT_NEAR(listens / 1e4, 1.0 / 3, 0.02);
}

TEST(Simulate, EpsilonListenFrequency) {
  auto ds = mol::simulate(mol::TigerConfig{}, mol::EpsilonListenPolicy(0.8), 100, 100, 2);
  int listens = 0;
  for (const auto& ep : ds.episodes())
    for (int a : ep.actions) listens += a == tiger::listen;
  EXPECT_NEAR(listens / 1e4, 0.8, 0.02);
}

TEST(Simulate, RejectsBadArguments) {
  EXPECT_THROW(mol::simulate(mol::TigerConfig{}, mol::UniformPolicy(3), 0, 5, 1), std::invalid_argument);
  EXPECT_THROW(mol::simulate(mol::TigerConfig{}, mol::UniformPolicy(2), 2, 5, 1), std::invalid_argument);
}

// ---- linear high-order MDP ----

mol::LinearHmdpConfig silent(mol::LinearHmdpConfig c) {
  c.noise = 0;
  return c;
}

TEST(LinearHmdp, ZeroDynamicsStayAtZero) {
  auto cfg = mol::linear_hmdp_preset(1);
  cfg.coefficients[0].setZero();
  cfg.action_effects[0].setZero();
  cfg.noise = 0;
  auto ds = mol::linear_hmdp_simulate(cfg, mol::UniformPolicy(3), 3, 10, 1);
  for (const auto& ep : ds.episodes()) {
    EXPECT_EQ(ep.observations.cwiseAbs().maxCoeff(), 0.0);
    for (double r : ep.rewards) EXPECT_EQ(r, 0.0);
  }
}

TEST(LinearHmdp, NoiselessTrajectoriesFollowTheRecursionExactly) {
  for (int k : {1, 2, 3, 5}) {
    auto cfg = silent(mol::linear_hmdp_preset(k, 2));
    cfg.burn_in = 3;
    auto ds = mol::linear_hmdp_simulate(cfg, mol::UniformPolicy(3), 4, 15, 11);
    for (const auto& ep : ds.episodes()) {
      for (int t = k - 1; t < ep.horizon(); ++t) {
        std::vector<Vector> lags;
        std::vector<int> acts;
        for (int i = 0; i < k; ++i) {
          lags.push_back(ep.observations.row(t - i).transpose());
          acts.push_back(ep.actions[t - i]);
        }
        const Vector next = mol::linear_hmdp_mean(cfg, lags, acts);
        EXPECT_LT((next - ep.observations.row(t + 1).transpose()).cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_DOUBLE_EQ(ep.rewards[t], next(0));
      }
    }
  }
}

// Order 1 has no random pre-history, so fixed actions fix the trajectory.
TEST(LinearHmdp, NoiselessIsDeterministicGivenActions) {
  auto cfg = silent(mol::linear_hmdp_preset(1, 2));
  const mol::TabularPolicy always_right(0, {}, 3, {0, 0, 1});
  auto a = mol::linear_hmdp_simulate(cfg, always_right, 2, 20, 1);
  auto b = mol::linear_hmdp_simulate(cfg, always_right, 2, 20, 99);
  EXPECT_EQ(a.episode(0).observations, b.episode(1).observations);
}

TEST(LinearHmdp, QuadraticReward) {
  auto cfg = mol::linear_hmdp_preset(2, 1, mol::LinearReward::quadratic);
  auto ds = mol::linear_hmdp_simulate(cfg, mol::UniformPolicy(3), 2, 10, 1);
  for (const auto& ep : ds.episodes())
    for (int t = 0; t < ep.horizon(); ++t) EXPECT_DOUBLE_EQ(ep.rewards[t], -std::pow(ep.observations(t + 1, 0), 2));
}

double residual_ss(const Matrix& x, const Vector& y) {
  const Vector beta = x.colPivHouseholderQr().solve(y);
  return (y - x * beta).squaredNorm();
}

TEST(LinearHmdp, SecondLagCarriesSignal) {
  auto cfg = mol::linear_hmdp_preset(2);
  auto ds = mol::linear_hmdp_simulate(cfg, mol::UniformPolicy(3), 50, 100, 4);
  std::vector<std::array<double, 6>> rows;
  for (const auto& ep : ds.episodes())
    for (int t = 1; t < ep.horizon(); ++t)
      rows.push_back({1.0, ep.observations(t, 0), ep.actions[t] == 0 ? 1.0 : 0.0, ep.actions[t] == 2 ? 1.0 : 0.0,
                      ep.observations(t - 1, 0), ep.observations(t + 1, 0)});
  const int n = static_cast<int>(rows.size());
  Matrix x(n, 5);
  Vector y(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < 5; ++j) x(i, j) = rows[i][j];
    y(i) = rows[i][5];
  }
  const double tss = (y.array() - y.mean()).square().sum();
  const double r2_short = 1 - residual_ss(x.leftCols(4), y) / tss;
  const double r2_long = 1 - residual_ss(x, y) / tss;
  EXPECT_GT(r2_long - r2_short, 0.05);
  const Vector beta = x.colPivHouseholderQr().solve(y);
  EXPECT_NEAR(beta(4), 0.6, 0.05);
}

TEST(LinearHmdp, StabilityAndShapeChecks) {
  auto cfg = mol::linear_hmdp_preset(2);
  cfg.coefficients[1](0, 0) = 0.8;  // 0.3 + 0.8 >= 1
  EXPECT_THROW(cfg.validate(), mol::ConfigError);
  EXPECT_THROW(mol::linear_hmdp_simulate(cfg, mol::UniformPolicy(3), 1, 5, 1), mol::ConfigError);
  auto missing = mol::linear_hmdp_preset(3);
  missing.coefficients.pop_back();
  EXPECT_THROW(missing.validate(), mol::ConfigError);
  EXPECT_THROW(mol::linear_hmdp_preset(0), mol::ConfigError);
  for (int k = 1; k <= 8; ++k) EXPECT_LT(mol::linear_hmdp_preset(k, 3).stability_norm(), 1.0);
}

TEST(LinearHmdp, PolicySeesAugmentedObservation) {
  auto cfg = mol::linear_hmdp_preset(2);
  // Keyed on the previous action's one-hot slot (layout: O_t, R_{t-1}, onehot(A_{t-1}), O_{t-1}).
  const mol::TabularPolicy repeat_zero(2, {{1.0, {1, 0, 0}}, {0.0, {0, 0, 1}}}, 3);
  EXPECT_THROW(mol::linear_hmdp_simulate(cfg, repeat_zero, 1, 5, 1), std::invalid_argument);
  auto ds = mol::linear_hmdp_simulate(cfg, repeat_zero, 5, 30, 1, 1, mol::PolicyInput{2, true});
  for (const auto& ep : ds.episodes())
    for (int t = 1; t < ep.horizon(); ++t) EXPECT_EQ(ep.actions[t], ep.actions[t - 1] == 0 ? 0 : 2);
}

// ---- tabular tiger ----

TEST(TabularTiger, TablesMatchTheDynamics) {
  mol::TigerConfig cfg;
  cfg.reveal_state = true;
  auto m = mol::tabular_tiger_mdp(cfg);
  EXPECT_NO_THROW(m.validate());
  EXPECT_EQ(m.rewards(tiger::left, tiger::open_left), -100);
  EXPECT_EQ(m.transitions[tiger::open_left].row(tiger::left), RowVector::Constant(2, 0.5));
  EXPECT_EQ(m.transitions[tiger::listen](tiger::left, tiger::left), 1.0);
  for (const auto& p : m.transitions)
    for (int s = 0; s < 2; ++s) EXPECT_NEAR(p.row(s).sum(), 1.0, 1e-15);
  cfg.reveal_state = false;
  EXPECT_THROW(mol::tabular_tiger_mdp(cfg), std::invalid_argument);
}

TEST(TabularTiger, ObservationMdpMatchesSimulation) {
  mol::TigerConfig cfg;
  cfg.reveal_state = true;
  auto m = mol::tabular_tiger_observation_mdp(cfg);
  EXPECT_NO_THROW(m.validate());
  auto index_of = [&](const RowVector& o) {
    for (int s = 0; s < m.state_count(); ++s)
      if (m.observations.row(s) == o) return s;
    return -1;
  };
  auto ds = mol::simulate(cfg, mol::UniformPolicy(3), 200, 100, 3);
  std::vector<Matrix> counts(3, Matrix::Zero(6, 6));
  for (const auto& ep : ds.episodes()) {
    EXPECT_EQ(index_of(ep.observations.row(0)) % 3, 2);
    for (int t = 0; t < ep.horizon(); ++t) {
      const int s = index_of(ep.observations.row(t));
      const int s2 = index_of(ep.observations.row(t + 1));
      ASSERT_GE(s, 0);
      ASSERT_GE(s2, 0);
      counts[ep.actions[t]](s, s2) += 1;
      EXPECT_EQ(ep.rewards[t], m.rewards(s, ep.actions[t]));
    }
  }
  for (int a = 0; a < 3; ++a)
    for (int s = 0; s < 6; ++s) {
      const double total = counts[a].row(s).sum();
      if (total < 200) continue;
      for (int s2 = 0; s2 < 6; ++s2) {
        const double p = m.transitions[a](s, s2);
        EXPECT_NEAR(counts[a](s, s2) / total, p, 4 * std::sqrt(std::max(p * (1 - p), 0.01) / total));
      }
    }
}

// ---- policies ----

TEST(Policies, RowsAreDistributions) {
  Matrix obs = Matrix::Random(20, 2);
  obs.col(0) = (obs.col(0).array() > 0).cast<double>().matrix();
  const mol::TabularPolicy tab(0, {{0.0, {0.2, 0.3, 0.5}}, {1.0, {1, 0, 0}}}, 3);
  const mol::LeadingColumnsPolicy lead(std::make_shared<mol::EpsilonListenPolicy>(0.3), 1);
  for (const mol::Policy* p : std::vector<const mol::Policy*>{&tab, &lead}) {
    const Matrix probs = p->probabilities(obs);
    EXPECT_LT((probs.rowwise().sum().array() - 1).abs().maxCoeff(), 1e-9);
    EXPECT_GE(probs.minCoeff(), 0.0);
  }
  const mol::UniformPolicy u(4);
  EXPECT_LT(std::abs(u.probabilities(obs).row(3).sum() - 1), 1e-12);
}

TEST(Policies, InvalidTablesAreRejected) {
  EXPECT_THROW(mol::TabularPolicy(0, {{0.0, {0.5, 0.6, 0}}}, 3), mol::ConfigError);
  EXPECT_THROW(mol::TabularPolicy(0, {{0.0, {0.5, 0.5}}}, 3), mol::ConfigError);
  EXPECT_THROW(mol::TabularPolicy(0, {{0.0, {1.5, -0.5, 0}}}, 3), mol::ConfigError);
  EXPECT_THROW(mol::EpsilonListenPolicy(1.2), mol::ConfigError);
  const mol::TabularPolicy tab(0, {{0.0, {1, 0, 0}}}, 3);
  EXPECT_THROW(tab.probabilities(Matrix::Constant(1, 1, 2.0)), std::invalid_argument);
}

TEST(Policies, JsonRoundTrip) {
  const mol::TabularPolicy tab(1, {{0.0, {0.2, 0.3, 0.5}}, {1.0, {1, 0, 0}}}, 3, {0, 0, 1});
  auto back = mol::basic_policy_from_json(tab.to_json(), 3);
  ASSERT_TRUE(back);
  Matrix obs(3, 2);
  obs << 0, 0, 0, 1, 7, 5;
  EXPECT_EQ(back->probabilities(obs), tab.probabilities(obs));
  EXPECT_EQ(mol::basic_policy_from_json(mol::EpsilonListenPolicy(0.6).to_json(), 3)->to_json(),
            mol::EpsilonListenPolicy(0.6).to_json());
  EXPECT_EQ(mol::basic_policy_from_json({{"kind", "greedy-from-Q"}}, 3), nullptr);
}

TEST(Policies, SamplingFrequencies) {
  auto eng = mol::rng::stream(4);
  RowVector p(3);
  p << 0.1, 0.6, 0.3;
  std::vector<int> counts(3, 0);
  for (int i = 0; i < 20000; ++i) ++counts[mol::Policy::sample_from(p, eng)];
  for (int a = 0; a < 3; ++a) EXPECT_NEAR(counts[a] / 20000.0, p(a), 0.015);
  RowVector point(3);
  point << 0, 0, 1;
  EXPECT_EQ(mol::Policy::sample_from(point, eng), 2);
}

}  // namespace
