#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "mol/envs/policy.hpp"
#include "mol/envs/simulate.hpp"
#include "mol/envs/tabular.hpp"
#include "mol/ope/behavior.hpp"
#include "mol/ope/dr.hpp"
#include "mol/ope/wald.hpp"
#include "mol/rl/dp.hpp"
#include "oracles.hpp"

namespace mol {

// Readable parameter names in test listings.
void PrintTo(BehaviorSpec::Kind kind, std::ostream* os) {
  *os << (kind == BehaviorSpec::Kind::logistic ? "logistic" : "tabular");
}

}  // namespace mol

namespace {

using mol::Matrix;
using mol::RowVector;
using mol::Vector;

mol::TigerConfig revealed() {
  mol::TigerConfig c;
  c.reveal_state = true;
  return c;
}

// Close to epsilon-listen, but leans toward the empty door.
mol::TabularPolicy ope_target() {
  return mol::TabularPolicy(1, {{0.0, {0.05, 0.15, 0.8}}, {1.0, {0.15, 0.05, 0.8}}}, 3);
}

std::shared_ptr<const mol::Policy> epsilon_listen() { return std::make_shared<mol::EpsilonListenPolicy>(); }

// Six revealed-tiger observation rows (heard, state).
Matrix tiger_rows() {
  return mol::tabular_tiger_observation_mdp(revealed()).observations;
}

struct Truth {
  double value;
  mol::QFunction q;
};

Truth tiger_truth(const mol::Policy& target) {
  const auto m = mol::tabular_tiger_observation_mdp(revealed());
  const auto dp = mol::dp_policy_value(m, target, 0.9);
  return {dp.value, mol::tabular_q_function(m, dp.q)};
}

// Mean over the dataset's transitions of max_a |b(a|o) - truth(a|o)|.
double mean_behavior_error(const mol::BehaviorModel& b, const mol::Policy& truth, const mol::TrajectoryDataset& ds) {
  double sum = 0;
  int count = 0;
  for (const auto& ep : ds.episodes()) {
    const Matrix obs = ep.observations.topRows(ep.horizon());
    sum += (b.probabilities(obs) - truth.probabilities(obs)).cwiseAbs().rowwise().maxCoeff().sum();
    count += ep.horizon();
  }
  return sum / count;
}

mol::Episode episode(Matrix obs, std::vector<int> actions, std::vector<double> rewards) {
  mol::Episode ep;
  ep.observations = std::move(obs);
  ep.actions = std::move(actions);
  ep.rewards = std::move(rewards);
  return ep;
}

// ---- wald ----

TEST(Wald, ZeroStandardErrorIsAPoint) {
  const auto ci = mol::wald_ci(1.5, 0.0, 0.05);
  EXPECT_EQ(ci.lower, 1.5);
  EXPECT_EQ(ci.upper, 1.5);
}

TEST(Wald, NinetyFivePercentUsesOnePointNineSix) {
  const auto ci = mol::wald_ci(0.0, 1.0, 0.05);
  EXPECT_NEAR(ci.upper, 1.96, 1e-3);
  EXPECT_NEAR(ci.lower, -1.96, 1e-3);
}

TEST(Wald, HalfWidthMatchesOracleQuantile) {
  const auto ci = mol::wald_ci(2.0, 0.5, 0.32);
  EXPECT_NEAR(ci.half_width(), oracle::normal_quantile(0.84) * 0.5, 1e-8);
  EXPECT_LE(ci.lower, 2.0);
  EXPECT_GE(ci.upper, 2.0);
}

TEST(Wald, RejectsInvalidInputs) {
  EXPECT_THROW(mol::wald_ci(0.0, -1.0, 0.05), std::invalid_argument);
  EXPECT_THROW(mol::wald_ci(0.0, 1.0, 0.0), std::invalid_argument);
  EXPECT_THROW(mol::wald_ci(0.0, 1.0, 1.0), std::invalid_argument);
  EXPECT_THROW(mol::wald_ci(0.0, std::nan(""), 0.05), std::invalid_argument);
}

// ---- probability floor ----

TEST(Floor, RaisesSmallEntriesAndKeepsRowsNormalized) {
  Matrix p(4, 3);
  p << 1, 0, 0,
       0.5, 0.495, 0.005,
       0.2, 0.3, 0.5,
       0.0, 0.0, 1.0;
  const Matrix f = mol::floor_probabilities(p);
  for (int i = 0; i < f.rows(); ++i) {
    EXPECT_NEAR(f.row(i).sum(), 1.0, 1e-12);
    EXPECT_GE(f.row(i).minCoeff(), mol::kProbabilityFloor - 1e-15);
  }
  EXPECT_NEAR(f(0, 0), 0.98, 1e-12);
  EXPECT_NEAR(f(0, 1), 0.01, 1e-12);
  EXPECT_TRUE(f.row(2).isApprox(p.row(2), 1e-15));
  // The rescaled entries keep their ratio.
  EXPECT_NEAR(f(1, 0) / f(1, 1), 0.5 / 0.495, 1e-12);
}

TEST(Floor, TooLargeFloorThrows) {
  EXPECT_THROW(mol::floor_probabilities(Matrix::Constant(1, 3, 1.0 / 3), 0.4), std::invalid_argument);
}

// ---- behavior models ----

class BehaviorKinds : public ::testing::TestWithParam<mol::BehaviorSpec::Kind> {};

TEST_P(BehaviorKinds, UniformBehaviorIsNearUniform) {
  auto ds = mol::simulate(revealed(), mol::UniformPolicy(3), 100, 30, 21);
  mol::BehaviorSpec spec;
  spec.kind = GetParam();
  const auto b = mol::fit_behavior(ds, spec);
  EXPECT_LT(mean_behavior_error(*b, mol::UniformPolicy(3), ds), 0.03);
  const Matrix p = b->probabilities(tiger_rows());
  EXPECT_LT((p.array() - 1.0 / 3).abs().maxCoeff(), 0.15);
}

TEST_P(BehaviorKinds, NearDeterministicBehaviorIsRecovered) {
  const mol::TabularPolicy behavior(1, {{0.0, {0.01, 0.98, 0.01}}, {1.0, {0.01, 0.98, 0.01}}}, 3);
  auto ds = mol::simulate(revealed(), behavior, 200, 50, 22);
  mol::BehaviorSpec spec;
  spec.kind = GetParam();
  const auto b = mol::fit_behavior(ds, spec);
  EXPECT_LT(mean_behavior_error(*b, behavior, ds), 0.01);
  EXPECT_GE(b->probabilities(tiger_rows()).minCoeff(), mol::kProbabilityFloor - 1e-15);
}

TEST_P(BehaviorKinds, StateDependentBehaviorIsRecovered) {
  const mol::TabularPolicy behavior(1, {{0.0, {0.7, 0.2, 0.1}}, {1.0, {0.1, 0.2, 0.7}}}, 3);
  auto ds = mol::simulate(revealed(), behavior, 200, 30, 23);
  mol::BehaviorSpec spec;
  spec.kind = GetParam();
  EXPECT_LT(mean_behavior_error(*mol::fit_behavior(ds, spec), behavior, ds), 0.04);
}

TEST_P(BehaviorKinds, RealizedActionsAreMoreLikelyThanChance) {
  const mol::TabularPolicy behavior(1, {{0.0, {0.6, 0.3, 0.1}}, {1.0, {0.1, 0.3, 0.6}}}, 3);
  auto ds = mol::simulate(revealed(), behavior, 50, 20, 24);
  mol::BehaviorSpec spec;
  spec.kind = GetParam();
  const auto b = mol::fit_behavior(ds, spec);
  double sum = 0;
  int count = 0;
  for (const auto& ep : ds.episodes()) {
    const Matrix p = b->probabilities(Matrix(ep.observations.topRows(ep.horizon())));
    for (int t = 0; t < ep.horizon(); ++t, ++count) sum += p(t, ep.actions[t]);
  }
  EXPECT_GE(sum / count, 1.0 / 3);
}

TEST_P(BehaviorKinds, UnobservedActionIsADataError) {
  const mol::TabularPolicy behavior(1, {{0.0, {0.0, 0.5, 0.5}}, {1.0, {0.0, 0.5, 0.5}}}, 3);
  auto ds = mol::simulate(revealed(), behavior, 10, 10, 25);
  mol::BehaviorSpec spec;
  spec.kind = GetParam();
  EXPECT_THROW(mol::fit_behavior(ds, spec), mol::DataError);
}

INSTANTIATE_TEST_SUITE_P(Ope, BehaviorKinds,
                         ::testing::Values(mol::BehaviorSpec::Kind::logistic, mol::BehaviorSpec::Kind::tabular),
                         [](const auto& info) {
                           return std::string(info.param == mol::BehaviorSpec::Kind::logistic ? "Logistic" : "Tabular");
                         });

TEST(Behavior, TabularFallsBackToMarginalForUnseenObservations) {
  auto ds = mol::simulate(revealed(), mol::UniformPolicy(3), 20, 10, 26);
  mol::BehaviorSpec spec;
  spec.kind = mol::BehaviorSpec::Kind::tabular;
  const Matrix p = mol::fit_behavior(ds, spec)->probabilities(Matrix::Constant(1, 2, 7.0));
  EXPECT_NEAR(p.sum(), 1.0, 1e-12);
  EXPECT_LT((p.array() - 1.0 / 3).abs().maxCoeff(), 0.1);
}

TEST(Behavior, KnownBehaviorIsFloored) {
  const mol::KnownBehavior b(std::make_shared<mol::TabularPolicy>(0, std::map<double, std::vector<double>>{{0.0, {1.0, 0.0}}}, 2));
  const Matrix p = b.probabilities(Matrix::Zero(1, 1));
  EXPECT_NEAR(p(0, 1), 0.01, 1e-12);
  EXPECT_NEAR(p(0, 0), 0.99, 1e-12);
}

TEST(Behavior, FitsOnlyTheListedEpisodes) {
  // Episode 0 always listens, episode 1 cycles through all actions.
  std::vector<mol::Episode> eps;
  eps.push_back(episode(Matrix::Zero(4, 1), {2, 2, 2}, {0, 0, 0}));
  eps.push_back(episode(Matrix::Zero(4, 1), {0, 1, 2}, {0, 0, 0}));
  mol::TrajectoryDataset ds(std::move(eps), mol::numbered_actions(3));
  mol::BehaviorSpec spec;
  spec.kind = mol::BehaviorSpec::Kind::tabular;
  const Matrix p = mol::fit_behavior(ds, spec, {1})->probabilities(Matrix::Zero(1, 1));
  EXPECT_LT((p.array() - 1.0 / 3).abs().maxCoeff(), 1e-12);
  EXPECT_THROW(mol::fit_behavior(ds, spec, {0}), mol::DataError);
}

// ---- episode scores ----

// Two observation cells {0, 1}, two actions, Q = [[1, 2], [3, 4]].
struct HandCase {
  mol::TabularMdp mdp;
  mol::QFunction q;
  mol::TabularPolicy target;
  mol::KnownBehavior behavior;
  mol::Episode ep;

  static mol::TabularMdp make_mdp() {
    mol::TabularMdp m;
    m.transitions = {Matrix::Identity(2, 2), Matrix::Identity(2, 2)};
    m.rewards = Matrix::Zero(2, 2);
    m.initial = Vector::Constant(2, 0.5);
    m.observations = (Matrix(2, 1) << 0, 1).finished();
    return m;
  }

  HandCase()
      : mdp(make_mdp()),
        q(mol::tabular_q_function(mdp, (Matrix(2, 2) << 1, 2, 3, 4).finished())),
        target(0, {{0.0, {0.5, 0.5}}, {1.0, {0.25, 0.75}}}, 2),
        behavior(std::make_shared<mol::TabularPolicy>(
            0, std::map<double, std::vector<double>>{{0.0, {0.8, 0.2}}, {1.0, {0.5, 0.5}}}, 2)),
        ep(episode((Matrix(3, 1) << 0, 1, 0).finished(), {1, 0}, {2.0, 3.0})) {}
};

TEST(EpisodeScore, HandComputedScores) {
  HandCase h;
  const double g = 0.9;
  const double v0 = 0.5 * 1 + 0.5 * 2;
  const double v1 = 0.25 * 3 + 0.75 * 4;
  const double rho0 = 0.5 / 0.2;
  const double rho1 = rho0 * 0.25 / 0.5;
  const double dm = v0;
  const double is = rho0 * 2.0 + g * rho1 * 3.0;
  const double dr = v0 + rho0 * (2.0 + g * v1 - 2) + g * rho1 * (3.0 + g * v0 - 3);
  EXPECT_NEAR(mol::episode_score(h.ep, h.target, h.q, h.behavior, g, mol::OpeMethod::dm).value, dm, 1e-12);
  EXPECT_NEAR(mol::episode_score(h.ep, h.target, h.q, h.behavior, g, mol::OpeMethod::is).value, is, 1e-12);
  const auto s = mol::episode_score(h.ep, h.target, h.q, h.behavior, g, mol::OpeMethod::dr);
  EXPECT_NEAR(s.value, dr, 1e-12);
  EXPECT_EQ(s.ratios, 2);
  EXPECT_EQ(s.clipped, 0);
}

TEST(EpisodeScore, ZeroQSingleStepIsImportanceWeightedReward) {
  HandCase h;
  std::vector<mol::Episode> eps;
  eps.push_back(episode((Matrix(2, 1) << 0, 1).finished(), {1}, {4.0}));
  eps.push_back(episode((Matrix(2, 1) << 1, 0).finished(), {0}, {-2.0}));
  eps.push_back(episode((Matrix(2, 1) << 0, 0).finished(), {0}, {1.0}));
  mol::TrajectoryDataset ds(eps, mol::numbered_actions(2));
  const auto zero = mol::zero_q_function(1, 2);
  const auto dr = mol::dr_estimate(ds, h.target, zero, h.behavior, 0.9, 0.05);
  const double expected = (0.5 / 0.2 * 4.0 + 0.25 / 0.5 * -2.0 + 0.5 / 0.8 * 1.0) / 3;
  EXPECT_NEAR(dr.estimate, expected, 1e-12);
  const auto is = mol::dr_estimate(ds, h.target, zero, h.behavior, 0.9, 0.05, mol::OpeMethod::is);
  EXPECT_NEAR(is.estimate, expected, 1e-12);
}

TEST(EpisodeScore, RatiosAreClipped) {
  // Behavior takes action 1 with the floor probability, target with 0.5.
  const mol::KnownBehavior b(
      std::make_shared<mol::TabularPolicy>(0, std::map<double, std::vector<double>>{{0.0, {1.0, 0.0}}}, 2));
  const mol::TabularPolicy target(0, {{0.0, {0.5, 0.5}}}, 2);
  const auto ep = episode(Matrix::Zero(4, 1), {1, 1, 1}, {1, 1, 1});
  const auto s = mol::episode_score(ep, target, mol::zero_q_function(1, 2), b, 0.5, mol::OpeMethod::is);
  EXPECT_EQ(s.ratios, 3);
  EXPECT_EQ(s.clipped, 2);
  EXPECT_NEAR(s.value, 50 + 0.5 * 100 + 0.25 * 100, 1e-9);
  mol::TrajectoryDataset ds({ep}, mol::numbered_actions(2));
  const auto r = mol::dr_estimate(ds, target, mol::zero_q_function(1, 2), b, 0.5, 0.05, mol::OpeMethod::is);
  EXPECT_NEAR(r.clip_fraction, 2.0 / 3, 1e-12);
}

// ---- estimator on the tiger ----

TEST(DrEstimate, ZeroRewardsGiveZero) {
  auto ds = mol::simulate(revealed(), mol::EpsilonListenPolicy(), 30, 10, 31);
  std::vector<mol::Episode> eps = ds.episodes();
  for (auto& ep : eps) std::fill(ep.rewards.begin(), ep.rewards.end(), 0.0);
  mol::TrajectoryDataset zero(std::move(eps), ds.action_set());
  const mol::KnownBehavior b(epsilon_listen());
  const auto r = mol::dr_estimate(zero, ope_target(), mol::zero_q_function(2, 3), b, 0.9, 0.05);
  EXPECT_EQ(r.estimate, 0.0);
  EXPECT_EQ(r.standard_error, 0.0);
  EXPECT_EQ(r.ci.lower, 0.0);
  EXPECT_EQ(r.ci.upper, 0.0);
}

TEST(DrEstimate, OnPolicyWithExactQMatchesDp) {
  const mol::EpsilonListenPolicy pi;
  const auto truth = tiger_truth(pi);
  auto ds = mol::simulate(revealed(), pi, 200, 30, 32);
  const mol::KnownBehavior b(epsilon_listen());
  const auto r = mol::dr_estimate(ds, pi, truth.q, b, 0.9, 0.05);
  EXPECT_LE(std::abs(r.estimate - truth.value), 3 * r.standard_error + 1e-6);
  EXPECT_EQ(r.n_episodes, 200u);
  EXPECT_EQ(r.clip_fraction, 0.0);
}

TEST(DrEstimate, DirectMethodWithExactQIsTheInitialValue) {
  const auto target = ope_target();
  const auto truth = tiger_truth(target);
  auto ds = mol::simulate(revealed(), mol::EpsilonListenPolicy(), 20, 5, 33);
  const mol::KnownBehavior b(epsilon_listen());
  const auto r = mol::dr_estimate(ds, target, truth.q, b, 0.9, 0.05, mol::OpeMethod::dm);
  // Both initial states have the same value under this symmetric target.
  EXPECT_NEAR(r.estimate, truth.value, 1e-8);
}

// Consistent when either the Q function or the behavior model is correct.
TEST(DrEstimate, DoublyRobust) {
  const auto target = ope_target();
  const auto truth = tiger_truth(target);
  const mol::KnownBehavior right_b(epsilon_listen());
  const mol::KnownBehavior wrong_b(std::make_shared<mol::UniformPolicy>(3));
  const auto zero_q = mol::zero_q_function(2, 3);
  for (int n : {100, 400}) {
    auto ds = mol::simulate(revealed(), mol::EpsilonListenPolicy(), n, 30, 34 + n);
    const auto exact_q = mol::dr_estimate(ds, target, truth.q, wrong_b, 0.9, 0.05);
    // With the exact Q the scores barely vary, so allow for rounding.
    EXPECT_LE(std::abs(exact_q.estimate - truth.value), 3 * exact_q.standard_error + 1e-6) << "n " << n;
    const auto exact_b = mol::dr_estimate(ds, target, zero_q, right_b, 0.9, 0.05);
    EXPECT_LE(std::abs(exact_b.estimate - truth.value), 3 * exact_b.standard_error) << "n " << n;
    // Both nuisances wrong: direct method with Q = 0 is far off.
    const auto neither = mol::dr_estimate(ds, target, zero_q, wrong_b, 0.9, 0.05, mol::OpeMethod::dm);
    EXPECT_GT(std::abs(neither.estimate - truth.value), 10.0);
  }
}

TEST(DrEstimate, HalfWidthShrinksWithRootN) {
  const auto target = ope_target();
  const mol::KnownBehavior b(epsilon_listen());
  const auto zero_q = mol::zero_q_function(2, 3);
  double small = 0, large = 0;
  for (std::uint64_t s = 0; s < 5; ++s) {
    small += mol::dr_estimate(mol::simulate(revealed(), mol::EpsilonListenPolicy(), 100, 30, 40 + s), target, zero_q, b,
                              0.9, 0.05)
                 .ci.half_width();
    large += mol::dr_estimate(mol::simulate(revealed(), mol::EpsilonListenPolicy(), 400, 30, 50 + s), target, zero_q, b,
                              0.9, 0.05)
                 .ci.half_width();
  }
  const double ratio = small / large;
  EXPECT_GE(ratio, 1.33);
  EXPECT_LE(ratio, 3.0);
}

TEST(DrEstimate, RejectsInvalidArguments) {
  auto ds = mol::simulate(revealed(), mol::EpsilonListenPolicy(), 5, 5, 35);
  const mol::KnownBehavior b(epsilon_listen());
  const auto q = mol::zero_q_function(2, 3);
  EXPECT_THROW(mol::dr_estimate(ds, ope_target(), q, b, 1.0, 0.05), std::invalid_argument);
  EXPECT_THROW(mol::dr_estimate(ds, ope_target(), q, b, 0.9, 0.0), std::invalid_argument);
}

// ---- cross-fitting ----

TEST(DrCrossfit, DeterministicAndReported) {
  auto ds = mol::simulate(revealed(), mol::EpsilonListenPolicy(), 40, 10, 36);
  mol::OpeConfig cfg;
  cfg.seed = 9;
  cfg.rl.iterations = 20;
  const auto a = mol::dr_crossfit(ds, ope_target(), cfg);
  const auto b = mol::dr_crossfit(ds, ope_target(), cfg);
  EXPECT_EQ(a.to_json().dump(), b.to_json().dump());
  EXPECT_EQ(a.scores, b.scores);
  EXPECT_EQ(a.n_episodes, 40u);
  EXPECT_EQ(a.scores.size(), 40u);
  const auto j = a.to_json();
  EXPECT_EQ(j.at("method"), "dr");
  EXPECT_DOUBLE_EQ(j.at("level").get<double>(), 0.95);
  EXPECT_LE(a.ci.lower, a.estimate);
  EXPECT_GE(a.ci.upper, a.estimate);
  cfg.seed = 10;
  EXPECT_NE(mol::dr_crossfit(ds, ope_target(), cfg).scores, a.scores);
}

TEST(DrCrossfit, CoversTheTruthOnModerateData) {
  const auto target = ope_target();
  const double truth = tiger_truth(target).value;
  auto ds = mol::simulate(revealed(), mol::EpsilonListenPolicy(), 200, 30, 37);
  mol::OpeConfig cfg;
  cfg.seed = 37;
  const auto r = mol::dr_crossfit(ds, target, cfg);
  EXPECT_LE(r.ci.lower, truth);
  EXPECT_GE(r.ci.upper, truth);
}

TEST(DrCrossfit, ConfigValidation) {
  auto ds = mol::simulate(revealed(), mol::EpsilonListenPolicy(), 10, 5, 38);
  mol::OpeConfig cfg;
  cfg.folds = 1;
  EXPECT_THROW(mol::dr_crossfit(ds, ope_target(), cfg), mol::ConfigError);
  cfg.folds = 2;
  cfg.alpha = 1.5;
  EXPECT_THROW(mol::dr_crossfit(ds, ope_target(), cfg), mol::ConfigError);
  EXPECT_THROW(mol::method_from_name("wis"), mol::ConfigError);
  EXPECT_EQ(mol::method_from_name("is"), mol::OpeMethod::is);
}

}  // namespace
