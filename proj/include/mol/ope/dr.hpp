#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mol/core/errors.hpp"
#include "mol/core/rng.hpp"
#include "mol/data/types.hpp"
#include "mol/envs/policy.hpp"
#include "mol/ope/behavior.hpp"
#include "mol/ope/wald.hpp"
#include "mol/regress/folds.hpp"
#include "mol/rl/fitted.hpp"
#include "mol/rl/qfunction.hpp"

namespace mol {

enum class OpeMethod { dm, is, dr };

inline std::string method_name(OpeMethod m) {
  switch (m) {
    case OpeMethod::dm: return "dm";
    case OpeMethod::is: return "is";
    default: return "dr";
  }
}

inline OpeMethod method_from_name(const std::string& s) {
  if (s == "dm") return OpeMethod::dm;
  if (s == "is") return OpeMethod::is;
  if (s == "dr") return OpeMethod::dr;
  throw ConfigError("unknown OPE method '" + s + "' (expected dm, is or dr)");
}

inline constexpr double kRatioClip = 100.0;

struct OpeReport {
  double estimate = 0;
  double standard_error = 0;
  Interval ci;
  std::size_t n_episodes = 0;
  OpeMethod method = OpeMethod::dr;
  double alpha = 0.05;
  double gamma = 0.9;
  double clip_fraction = 0;  // share of (episode, t) ratios clipped at kRatioClip
  std::vector<double> scores;  // per-episode psi

  nlohmann::json to_json() const {
    return {{"estimate", estimate},
            {"standard_error", standard_error},
            {"ci", {ci.lower, ci.upper}},
            {"level", 1 - alpha},
            {"n_episodes", n_episodes},
            {"method", method_name(method)},
            {"gamma", gamma},
            {"clip_fraction", clip_fraction}};
  }
};

struct EpisodeScore {
  double value = 0;
  int ratios = 0;
  int clipped = 0;
};

// Per-episode score
//   dm: V(o_0)
//   is: sum_t g^t rho_{0:t} r_t
//   dr: V(o_0) + sum_t g^t rho_{0:t} (r_t + g V(o_{t+1}) - Q(o_t, a_t))
// with V(o) = sum_a pi(a|o) Q(o, a) and rho_{0:t} = prod_{s<=t} pi(a_s|o_s) / b(a_s|o_s)
// clipped at kRatioClip.
inline EpisodeScore episode_score(const Episode& ep, const Policy& target, const QFunction& q,
                                  const BehaviorModel& behavior, double gamma, OpeMethod method) {
  const int T = ep.horizon();
  EpisodeScore out;
  const Matrix pi = target.probabilities(ep.observations);
  Matrix qv;
  Vector v;
  if (method != OpeMethod::is) {
    qv = q.values(ep.observations);
    v = qv.cwiseProduct(pi).rowwise().sum();
    out.value = v(0);
  }
  if (method == OpeMethod::dm || T == 0) return out;
  const Matrix b = behavior.probabilities(Matrix(ep.observations.topRows(T)));
  double rho = 1;
  double discount = 1;
  for (int t = 0; t < T; ++t) {
    const int a = ep.actions[t];
    rho *= pi(t, a) / b(t, a);
    ++out.ratios;
    if (rho > kRatioClip) {
      rho = kRatioClip;
      ++out.clipped;
    }
    double term = ep.rewards[t];
    if (method == OpeMethod::dr) term += gamma * v(t + 1) - qv(t, a);
    out.value += discount * rho * term;
    discount *= gamma;
  }
  return out;
}

namespace detail {

inline OpeReport summarize_scores(std::vector<EpisodeScore> scores, OpeMethod method, double gamma, double alpha) {
  OpeReport r;
  r.method = method;
  r.gamma = gamma;
  r.alpha = alpha;
  r.n_episodes = scores.size();
  double sum = 0;
  long ratios = 0, clipped = 0;
  for (const auto& s : scores) {
    sum += s.value;
    ratios += s.ratios;
    clipped += s.clipped;
    r.scores.push_back(s.value);
  }
  const double n = static_cast<double>(scores.size());
  r.estimate = sum / n;
  double ss = 0;
  for (const auto& s : scores) ss += (s.value - r.estimate) * (s.value - r.estimate);
  r.standard_error = scores.size() > 1 ? std::sqrt(ss / (n - 1)) / std::sqrt(n) : 0.0;
  r.ci = wald_ci(r.estimate, r.standard_error, alpha);
  r.clip_fraction = ratios > 0 ? static_cast<double>(clipped) / static_cast<double>(ratios) : 0.0;
  return r;
}

}  // namespace detail

// Value estimate of `target` with fixed nuisances. The nuisances should be
// fitted on data disjoint from `ds`; dr_crossfit arranges that.
inline OpeReport dr_estimate(const TrajectoryDataset& ds, const Policy& target, const QFunction& q,
                             const BehaviorModel& behavior, double gamma, double alpha,
                             OpeMethod method = OpeMethod::dr) {
  if (!(gamma > 0 && gamma < 1)) throw std::invalid_argument("dr_estimate: gamma must be in (0, 1)");
  if (!(alpha > 0 && alpha < 1)) throw std::invalid_argument("dr_estimate: alpha must be in (0, 1)");
  std::vector<EpisodeScore> scores;
  for (const auto& ep : ds.episodes()) scores.push_back(episode_score(ep, target, q, behavior, gamma, method));
  return detail::summarize_scores(std::move(scores), method, gamma, alpha);
}

struct OpeConfig {
  int folds = 2;
  double alpha = 0.05;
  OpeMethod method = OpeMethod::dr;
  RlConfig rl;
  BehaviorSpec behavior;
  std::uint64_t seed = 0;

  void validate() const {
    if (folds < 2) throw ConfigError("ope: folds must be >= 2");
    if (!(alpha > 0 && alpha < 1)) throw ConfigError("ope: alpha must be in (0, 1)");
    rl.validate();
    behavior.validate();
  }
};

inline void to_json(nlohmann::json& j, const OpeConfig& c) {
  j = nlohmann::json{{"folds", c.folds}, {"alpha", c.alpha}, {"method", method_name(c.method)},
                     {"rl", c.rl},       {"behavior", c.behavior}, {"seed", c.seed}};
}

// Cross-fitted estimate: for each fold, Q (by FQE) and the behavior model are
// fitted on the other folds and used to score the fold's episodes.
inline OpeReport dr_crossfit(const TrajectoryDataset& ds, const Policy& target, const OpeConfig& cfg) {
  cfg.validate();
  const auto folds = make_folds(ds, cfg.folds, rng::derive(cfg.seed, "ope-folds"));
  std::vector<EpisodeScore> scores(ds.episode_count());
  for (int f = 0; f < folds.fold_count(); ++f) {
    const auto train_ids = folds.complement(f);
    std::vector<Episode> train;
    for (int e : train_ids) train.push_back(ds.episode(e));
    TrajectoryDataset train_ds(std::move(train), ds.action_set(), ds.meta(), ds.layout());
    RlConfig rl = cfg.rl;
    rl.regressor.seed = rng::derive_path(cfg.seed, {rng::name_id("ope-q"), static_cast<std::uint64_t>(f)});
    const auto q = fqe(train_ds, target, rl).q;
    BehaviorSpec bspec = cfg.behavior;
    bspec.features.seed = rng::derive_path(cfg.seed, {rng::name_id("ope-behavior"), static_cast<std::uint64_t>(f)});
    const auto b = fit_behavior(train_ds, bspec);
    for (int e : folds.members(f)) scores[e] = episode_score(ds.episode(e), target, *q, *b, cfg.rl.gamma, cfg.method);
  }
  return detail::summarize_scores(std::move(scores), cfg.method, cfg.rl.gamma, cfg.alpha);
}

}  // namespace mol
