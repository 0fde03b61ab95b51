#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "mol/core/errors.hpp"
#include "mol/data/types.hpp"

namespace mol {

inline RowVector onehot(int action, int action_count) {
  RowVector v = RowVector::Zero(action_count);
  v(action) = 1.0;
  return v;
}

// Pooled per-dimension standardization. Uses the population divisor (n, not
// n - 1); constant dimensions keep scale 1.
inline std::pair<TrajectoryDataset, ScalingParams> standardize(const TrajectoryDataset& ds) {
  const int d = ds.obs_dim();
  Vector sum = Vector::Zero(d);
  double count = 0;
  for (const auto& ep : ds.episodes()) {
    sum += ep.observations.colwise().sum().transpose();
    count += static_cast<double>(ep.observations.rows());
  }
  ScalingParams params;
  params.location = sum / count;
  Vector sq = Vector::Zero(d);
  for (const auto& ep : ds.episodes()) {
    sq += (ep.observations.rowwise() - params.location.transpose()).array().square().colwise().sum().matrix().transpose();
  }
  params.scale = (sq / count).cwiseSqrt();
  for (int j = 0; j < d; ++j) {
    // Relative cutoff so that round-off in a constant column does not blow up.
    if (!(params.scale(j) > 1e-12 * std::max(1.0, std::abs(params.location(j))))) params.scale(j) = 1.0;
  }
  std::vector<Episode> episodes = ds.episodes();
  for (auto& ep : episodes) {
    ep.observations =
        ((ep.observations.rowwise() - params.location.transpose()).array().rowwise() / params.scale.transpose().array())
            .matrix();
  }
  return {TrajectoryDataset(std::move(episodes), ds.action_set(), ds.meta(), ds.layout()), params};
}

inline TrajectoryDataset unstandardize(const TrajectoryDataset& ds, const ScalingParams& params) {
  std::vector<Episode> episodes = ds.episodes();
  for (auto& ep : episodes) {
    ep.observations = ((ep.observations.array().rowwise() * params.scale.transpose().array()).matrix().rowwise() +
                       params.location.transpose());
  }
  return TrajectoryDataset(std::move(episodes), ds.action_set(), ds.meta(), ds.layout());
}

// Lag augmentation turning an order-k process into a first-order one. The new
// observation at original time t is
//   (O_t, [R_{t-1}], onehot(A_{t-1}), O_{t-1}, ..., [R_{t-k+1}], onehot(A_{t-k+1}), O_{t-k+1}),
// new time 0 corresponds to original time k-1, and each episode loses k-1
// transitions. k = 1 returns the dataset unchanged.
inline TrajectoryDataset augment_order(const TrajectoryDataset& ds, int k, bool include_reward) {
  if (k < 1) throw std::invalid_argument("augment_order: k must be positive");
  if (k == 1) return ds;
  if (ds.layout().order != 1) throw std::invalid_argument("augment_order: dataset is already lag-augmented");
  ObservationLayout layout{ds.obs_dim(), ds.action_count(), k, include_reward};
  const int base = ds.obs_dim();
  const int na = ds.action_count();
  std::vector<Episode> out;
  out.reserve(ds.episode_count());
  for (std::size_t e = 0; e < ds.episode_count(); ++e) {
    const auto& ep = ds.episode(e);
    if (ep.horizon() < k) {
      throw DataError("augment_order: episode '" + (ep.id.empty() ? std::to_string(e) : ep.id) + "' has T=" +
                      std::to_string(ep.horizon()) + " < k=" + std::to_string(k));
    }
    Episode aug;
    aug.id = ep.id;
    const int horizon = ep.horizon() - (k - 1);
    aug.observations.resize(horizon + 1, layout.dim());
    for (int tau = 0; tau <= horizon; ++tau) {
      const int t = tau + k - 1;
      int col = 0;
      aug.observations.row(tau).segment(col, base) = ep.observations.row(t);
      col += base;
      for (int lag = 1; lag < k; ++lag) {
        if (include_reward) aug.observations(tau, col++) = ep.rewards[t - lag];
        aug.observations.row(tau).segment(col, na) = onehot(ep.actions[t - lag], na);
        col += na;
        aug.observations.row(tau).segment(col, base) = ep.observations.row(t - lag);
        col += base;
      }
      if (tau < horizon) {
        aug.actions.push_back(ep.actions[t]);
        aug.rewards.push_back(ep.rewards[t]);
      }
    }
    out.push_back(std::move(aug));
  }
  auto meta = ds.meta();
  meta["augmented_order"] = k;
  meta["augmented_with_reward"] = include_reward;
  return TrajectoryDataset(std::move(out), ds.action_set(), std::move(meta), layout);
}

// Gap-q tuple (O_t, A_t, O_{t+1}, A_{t+1}, O_{t+q-1}, A_{t+q-1}, O_{t+q}).
struct GapTuple {
  int episode = 0;
  int t = 0;
  Vector origin;
  int origin_action = 0;
  Vector after_origin;
  int after_origin_action = 0;
  Vector before_end;
  int before_end_action = 0;
  Vector end;
};

// Number of gap-q tuples in an episode with T transitions. A tuple starting
// at t needs O_{t+q}, so t runs over 0..T-q; A_{t+1} then exists because q >= 2.
inline int gap_tuple_count(int horizon, int q) { return std::max(0, horizon - q + 1); }

inline std::vector<GapTuple> transition_view(const TrajectoryDataset& ds, int q) {
  if (q < 2) throw std::invalid_argument("transition_view: q must be at least 2");
  std::vector<GapTuple> out;
  for (std::size_t e = 0; e < ds.episode_count(); ++e) {
    const auto& ep = ds.episode(e);
    const int count = gap_tuple_count(ep.horizon(), q);
    for (int t = 0; t < count; ++t) {
      GapTuple g;
      g.episode = static_cast<int>(e);
      g.t = t;
      g.origin = ep.observations.row(t).transpose();
      g.origin_action = ep.actions[t];
      g.after_origin = ep.observations.row(t + 1).transpose();
      g.after_origin_action = ep.actions[t + 1];
      g.before_end = ep.observations.row(t + q - 1).transpose();
      g.before_end_action = ep.actions[t + q - 1];
      g.end = ep.observations.row(t + q).transpose();
      out.push_back(std::move(g));
    }
  }
  return out;
}

}  // namespace mol
