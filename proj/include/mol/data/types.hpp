#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "mol/core/errors.hpp"
#include "mol/core/types.hpp"

namespace mol {

// One trajectory of observation-action-reward triplets. Row t of
// `observations` is O_t; there is one more observation than actions.
struct Episode {
  std::string id;
  Matrix observations;
  std::vector<int> actions;
  std::vector<double> rewards;

  int horizon() const { return static_cast<int>(actions.size()); }
};

// Describes how an observation vector is laid out after lag augmentation.
//
// An order-k observation is
//   (O_t, [R_{t-1}], onehot(A_{t-1}), O_{t-1}, ..., [R_{t-k+1}], onehot(A_{t-k+1}), O_{t-k+1})
// where the bracketed rewards are present only when `with_reward` is set.
// Order 1 is the raw observation.
struct ObservationLayout {
  int base_dim = 0;
  int action_count = 0;
  int order = 1;
  bool with_reward = false;

  int block_dim() const { return (with_reward ? 1 : 0) + action_count + base_dim; }
  int dim() const { return base_dim + (order - 1) * block_dim(); }

  // Leading coordinates of O_t that are not already known from (O_{t-1}, A_{t-1}).
  int fresh_dim() const { return order == 1 ? base_dim : base_dim + (with_reward ? 1 : 0); }

  // Offset and width of the oldest lag block, the part of (O_t, A_t) that is
  // not contained in O_{t+1}. For order 1 that is the whole (O_t, A_t) pair,
  // with the action appended one-hot.
  int stale_offset() const { return order == 1 ? 0 : base_dim + (order - 2) * block_dim(); }
  int stale_dim() const { return order == 1 ? base_dim + action_count : block_dim(); }

  bool operator==(const ObservationLayout&) const = default;
};

// Per-dimension location and scale used by standardize().
struct ScalingParams {
  Vector location;
  Vector scale;
};

// Immutable collection of episodes sharing an observation dimension and an
// ordered action set.
class TrajectoryDataset {
 public:
  TrajectoryDataset(std::vector<Episode> episodes, std::vector<std::string> action_set,
                    nlohmann::json meta = nlohmann::json::object())
      : TrajectoryDataset(std::move(episodes), std::move(action_set), std::move(meta), ObservationLayout{}) {}

  TrajectoryDataset(std::vector<Episode> episodes, std::vector<std::string> action_set, nlohmann::json meta,
                    ObservationLayout layout)
      : episodes_(std::move(episodes)), action_set_(std::move(action_set)), meta_(std::move(meta)), layout_(layout) {
    if (episodes_.empty()) throw DataError("dataset has no episodes");
    if (action_set_.empty()) throw DataError("dataset has an empty action set");
    obs_dim_ = static_cast<int>(episodes_.front().observations.cols());
    if (obs_dim_ <= 0) throw DataError("observations must have positive dimension");
    if (layout_.base_dim == 0) {
      layout_ = ObservationLayout{obs_dim_, action_count(), 1, false};
    }
    if (layout_.dim() != obs_dim_ || layout_.action_count != action_count()) {
      throw DataError("observation layout does not match the dataset dimensions");
    }
    for (std::size_t e = 0; e < episodes_.size(); ++e) validate(episodes_[e], e);
  }

  const std::vector<Episode>& episodes() const { return episodes_; }
  const Episode& episode(std::size_t i) const { return episodes_.at(i); }
  std::size_t episode_count() const { return episodes_.size(); }
  const std::vector<std::string>& action_set() const { return action_set_; }
  int action_count() const { return static_cast<int>(action_set_.size()); }
  int obs_dim() const { return obs_dim_; }
  const ObservationLayout& layout() const { return layout_; }
  const nlohmann::json& meta() const { return meta_; }

  // N: total number of transitions across episodes.
  std::size_t transition_count() const {
    std::size_t n = 0;
    for (const auto& ep : episodes_) n += ep.actions.size();
    return n;
  }

  int max_horizon() const {
    int t = 0;
    for (const auto& ep : episodes_) t = std::max(t, ep.horizon());
    return t;
  }

  int min_horizon() const {
    int t = episodes_.front().horizon();
    for (const auto& ep : episodes_) t = std::min(t, ep.horizon());
    return t;
  }

 private:
  void validate(const Episode& ep, std::size_t index) const {
    auto name = [&] { return "episode '" + (ep.id.empty() ? std::to_string(index) : ep.id) + "'"; };
    const auto t = ep.actions.size();
    if (ep.rewards.size() != t || static_cast<std::size_t>(ep.observations.rows()) != t + 1) {
      throw DataError(name() + ": need |observations| = |actions| + 1 = |rewards| + 1");
    }
    if (ep.observations.cols() != obs_dim_) throw DataError(name() + ": inconsistent observation dimension");
    for (int a : ep.actions) {
      if (a < 0 || a >= action_count()) throw DataError(name() + ": action index outside the action set");
    }
    if (!ep.observations.allFinite()) throw DataError(name() + ": non-finite observation");
    for (double r : ep.rewards) {
      if (!std::isfinite(r)) throw DataError(name() + ": non-finite reward");
    }
  }

  std::vector<Episode> episodes_;
  std::vector<std::string> action_set_;
  nlohmann::json meta_;
  ObservationLayout layout_;
  int obs_dim_ = 0;
};

}  // namespace mol
