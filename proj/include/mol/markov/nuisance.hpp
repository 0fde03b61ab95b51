#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "mol/core/rng.hpp"
#include "mol/data/transform.hpp"
#include "mol/data/types.hpp"
#include "mol/markov/features.hpp"
#include "mol/regress/folds.hpp"
#include "mol/regress/learner.hpp"

namespace mol {

// Row-aligned views of one episode used by both nuisance directions.
struct EpisodeDesign {
  Matrix conditioning;   // T x (d + |A|): (O_t, onehot(A_t)) for t = 0..T-1
  Matrix forward_test;   // (T+1) x fresh_dim: fresh part of O_t
  Matrix backward_test;  // T x stale_dim: stale part of (O_t, A_t)
};

inline EpisodeDesign episode_design(const TrajectoryDataset& ds, const Episode& ep) {
  const auto& layout = ds.layout();
  const int T = ep.horizon();
  const int d = ds.obs_dim();
  const int na = ds.action_count();
  EpisodeDesign out;
  out.conditioning.resize(T, d + na);
  out.backward_test.resize(T, layout.stale_dim());
  for (int t = 0; t < T; ++t) {
    out.conditioning.row(t).head(d) = ep.observations.row(t);
    out.conditioning.row(t).tail(na) = onehot(ep.actions[t], na);
    if (layout.order == 1) {
      out.backward_test.row(t) = out.conditioning.row(t);
    } else {
      out.backward_test.row(t) = ep.observations.row(t).segment(layout.stale_offset(), layout.stale_dim());
    }
  }
  out.forward_test = ep.observations.leftCols(layout.fresh_dim());
  return out;
}

// Cross-fitted nuisance pair for one fold, trained on the other folds.
//   forward:  E[g(O_{t+1}) | O_t, A_t]
//   backward: E[h(O_t, A_t) | O_{t+1}, A_{t+1}]
struct NuisancePair {
  FittedRegressor forward;
  FittedRegressor backward;
};

struct NuisanceModels {
  std::vector<NuisancePair> per_fold;
};

struct NuisanceTrainingSet {
  Matrix forward_inputs, forward_targets, backward_inputs, backward_targets;
};

inline NuisanceTrainingSet nuisance_training_set(const TrajectoryDataset& ds, const FeatureBank& bank,
                                                 const std::vector<int>& episodes) {
  Eigen::Index n_fwd = 0, n_bwd = 0;
  for (int e : episodes) {
    const int T = ds.episode(e).horizon();
    n_fwd += T;
    n_bwd += std::max(0, T - 1);
  }
  const int p = ds.obs_dim() + ds.action_count();
  NuisanceTrainingSet s{Matrix(n_fwd, p), Matrix(n_fwd, 2 * bank.forward_count()), Matrix(n_bwd, p),
                        Matrix(n_bwd, 2 * bank.backward_count())};
  Eigen::Index rf = 0, rb = 0;
  for (int e : episodes) {
    const auto& ep = ds.episode(e);
    const int T = ep.horizon();
    if (T == 0) continue;
    auto des = episode_design(ds, ep);
    s.forward_inputs.middleRows(rf, T) = des.conditioning;
    s.forward_targets.middleRows(rf, T) = char_features(Matrix(des.forward_test.bottomRows(T)), bank.forward);
    rf += T;
    if (T >= 2) {
      s.backward_inputs.middleRows(rb, T - 1) = des.conditioning.bottomRows(T - 1);
      s.backward_targets.middleRows(rb, T - 1) =
          char_features(Matrix(des.backward_test.topRows(T - 1)), bank.backward);
      rb += T - 1;
    }
  }
  return s;
}

// Fits one forward and one backward model per fold on the episodes outside
// that fold. Each model regresses all 2J (resp. 2L) feature columns at once.
inline NuisanceModels fit_nuisances(const TrajectoryDataset& ds, const FeatureBank& bank, const FoldAssignment& folds,
                                    const Learner& forward_learner, const Learner& backward_learner,
                                    std::uint64_t seed) {
  if (folds.episode_count() != ds.episode_count()) throw std::invalid_argument("fit_nuisances: folds do not match data");
  NuisanceModels out;
  for (int f = 0; f < folds.fold_count(); ++f) {
    auto train = nuisance_training_set(ds, bank, folds.complement(f));
    if (train.forward_inputs.rows() == 0 || train.backward_inputs.rows() == 0) {
      throw DataError("fit_nuisances: fold " + std::to_string(f) + " has no training transitions");
    }
    auto fwd = forward_learner.fit(train.forward_inputs, train.forward_targets, rng::derive_path(seed, {1, std::uint64_t(f)}));
    auto bwd = backward_learner.fit(train.backward_inputs, train.backward_targets, rng::derive_path(seed, {2, std::uint64_t(f)}));
    out.per_fold.push_back(NuisancePair{std::move(fwd), std::move(bwd)});
  }
  return out;
}

inline NuisanceModels fit_nuisances(const TrajectoryDataset& ds, const FeatureBank& bank, const FoldAssignment& folds,
                                    const RegressorSpec& spec, std::uint64_t seed) {
  RandomFeatureRidge learner(spec);
  return fit_nuisances(ds, bank, folds, learner, learner, seed);
}

}  // namespace mol
