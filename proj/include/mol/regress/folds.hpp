#pragma once

#include <cstdint>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "mol/core/rng.hpp"
#include "mol/data/types.hpp"

namespace mol {

// Partition of episodes into K cross-fitting folds.
class FoldAssignment {
 public:
  FoldAssignment(int folds, std::vector<int> fold_of_episode)
      : folds_(folds), fold_of_(std::move(fold_of_episode)) {
    std::vector<int> sizes(folds_, 0);
    for (int f : fold_of_) {
      if (f < 0 || f >= folds_) throw std::invalid_argument("FoldAssignment: fold index out of range");
      ++sizes[f];
    }
    for (int s : sizes) {
      if (s == 0) throw std::invalid_argument("FoldAssignment: empty fold");
    }
  }

  int fold_count() const { return folds_; }
  int fold_of(std::size_t episode) const { return fold_of_.at(episode); }
  std::size_t episode_count() const { return fold_of_.size(); }
  const std::vector<int>& assignment() const { return fold_of_; }

  std::vector<int> members(int fold) const {
    std::vector<int> out;
    for (std::size_t e = 0; e < fold_of_.size(); ++e)
      if (fold_of_[e] == fold) out.push_back(static_cast<int>(e));
    return out;
  }

  std::vector<int> complement(int fold) const {
    std::vector<int> out;
    for (std::size_t e = 0; e < fold_of_.size(); ++e)
      if (fold_of_[e] != fold) out.push_back(static_cast<int>(e));
    return out;
  }

 private:
  int folds_;
  std::vector<int> fold_of_;
};

// Splits episodes (never time points) into K folds whose sizes differ by at
// most one. Deterministic given the seed.
inline FoldAssignment make_folds(std::size_t episodes, int folds, std::uint64_t seed) {
  if (folds < 2) throw std::invalid_argument("make_folds: K must be at least 2");
  if (static_cast<std::size_t>(folds) > episodes) {
    throw std::invalid_argument("make_folds: K=" + std::to_string(folds) + " exceeds the number of episodes (" +
                                std::to_string(episodes) + ")");
  }
  std::vector<int> order(episodes);
  std::iota(order.begin(), order.end(), 0);
  auto eng = rng::stream(seed, "folds");
  for (std::size_t i = episodes; i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(order[i - 1], order[pick(eng)]);
  }
  std::vector<int> fold_of(episodes);
  for (std::size_t pos = 0; pos < episodes; ++pos) fold_of[order[pos]] = static_cast<int>(pos % folds);
  return FoldAssignment(folds, std::move(fold_of));
}

inline FoldAssignment make_folds(const TrajectoryDataset& ds, int folds, std::uint64_t seed) {
  return make_folds(ds.episode_count(), folds, seed);
}

}  // namespace mol
