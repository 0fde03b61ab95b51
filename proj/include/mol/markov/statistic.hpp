#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "mol/core/errors.hpp"
#include "mol/data/transform.hpp"
#include "mol/markov/features.hpp"
#include "mol/markov/nuisance.hpp"
#include "mol/regress/folds.hpp"

namespace mol {

// Statistic components per (j, l) pair of test functions.
enum class Component { cc = 0, cs = 1, sc = 2, ss = 3 };

// Residuals of every gap-q tuple. The contribution of tuple i to
// S(q, j, l, c) is forward(i, 2j + a) * backward(i, 2l + b) with c = 2a + b,
// so the full contribution table is kept in this factorized form.
struct GapBlock {
  int gap = 0;
  Matrix forward;             // n_q x 2J: g(O_{t+q}) - E^[g(O_{t+q}) | O_{t+q-1}, A_{t+q-1}]
  Matrix backward;            // n_q x 2L: h(O_t, A_t) - E^[h(O_t, A_t) | O_{t+1}, A_{t+1}]
  std::vector<int> episode;   // episode of each row
  std::vector<int> time;      // t of each row

  std::size_t size() const { return episode.size(); }
};

struct ContributionTable {
  int forward_count = 0;
  int backward_count = 0;
  std::size_t episode_count = 0;
  std::vector<GapBlock> gaps;

  int components_per_gap() const { return 4 * forward_count * backward_count; }
  int statistic_count() const { return static_cast<int>(gaps.size()) * components_per_gap(); }

  std::size_t index(std::size_t gap_index, int j, int l, Component c) const {
    return ((gap_index * forward_count + j) * backward_count + l) * 4 + static_cast<int>(c);
  }

  double value(std::size_t gap_index, std::size_t row, int j, int l, Component c) const {
    const auto& g = gaps.at(gap_index);
    const int a = static_cast<int>(c) / 2;
    const int b = static_cast<int>(c) % 2;
    return g.forward(row, 2 * j + a) * g.backward(row, 2 * l + b);
  }

  // Materialized n_q x (4JL) contributions of one gap, in statistic order.
  Matrix dense(std::size_t gap_index) const {
    const auto& g = gaps.at(gap_index);
    Matrix out(g.size(), components_per_gap());
    for (std::size_t i = 0; i < g.size(); ++i)
      for (int j = 0; j < forward_count; ++j)
        for (int l = 0; l < backward_count; ++l)
          for (int c = 0; c < 4; ++c)
            out(i, (j * backward_count + l) * 4 + c) = value(gap_index, i, j, l, static_cast<Component>(c));
    return out;
  }
};

// Evaluates forward and backward residuals with each episode's own-fold
// nuisance models and assembles them into gap-q tuples for q = 2..max_gap.
inline ContributionTable statistic_contributions(const TrajectoryDataset& ds, const FeatureBank& bank,
                                                 const NuisanceModels& nuisances, const FoldAssignment& folds,
                                                 int max_gap) {
  if (max_gap < 2) throw std::invalid_argument("statistic_contributions: Q must be at least 2");
  if (max_gap > ds.max_horizon()) {
    throw DataError("statistic_contributions: Q=" + std::to_string(max_gap) +
                    " exceeds the longest episode; max feasible Q is " + std::to_string(ds.max_horizon()));
  }
  if (static_cast<int>(nuisances.per_fold.size()) != folds.fold_count()) {
    throw std::invalid_argument("statistic_contributions: nuisances do not cover all folds");
  }
  const int J = bank.forward_count();
  const int L = bank.backward_count();
  ContributionTable table;
  table.forward_count = J;
  table.backward_count = L;
  table.episode_count = ds.episode_count();

  std::vector<Eigen::Index> rows_per_gap(max_gap + 1, 0);
  for (const auto& ep : ds.episodes())
    for (int q = 2; q <= max_gap; ++q) rows_per_gap[q] += gap_tuple_count(ep.horizon(), q);
  for (int q = 2; q <= max_gap; ++q) {
    GapBlock g;
    g.gap = q;
    g.forward.resize(rows_per_gap[q], 2 * J);
    g.backward.resize(rows_per_gap[q], 2 * L);
    g.episode.reserve(rows_per_gap[q]);
    g.time.reserve(rows_per_gap[q]);
    table.gaps.push_back(std::move(g));
  }

  for (std::size_t e = 0; e < ds.episode_count(); ++e) {
    const auto& ep = ds.episode(e);
    const int T = ep.horizon();
    if (T < 2) continue;
    const auto& models = nuisances.per_fold.at(folds.fold_of(e));
    auto des = episode_design(ds, ep);
    // Row t: residual of g(O_{t+1}) given (O_t, A_t), t = 0..T-1.
    Matrix fwd = char_features(Matrix(des.forward_test.bottomRows(T)), bank.forward) -
                 models.forward.predict(des.conditioning);
    // Row t: residual of h(O_t, A_t) given (O_{t+1}, A_{t+1}), t = 0..T-2.
    Matrix bwd = char_features(Matrix(des.backward_test.topRows(T - 1)), bank.backward) -
                 models.backward.predict(Matrix(des.conditioning.bottomRows(T - 1)));
    for (int q = 2; q <= max_gap; ++q) {
      auto& g = table.gaps[q - 2];
      const int count = gap_tuple_count(T, q);
      for (int t = 0; t < count; ++t) {
        const auto row = static_cast<Eigen::Index>(g.episode.size());
        g.forward.row(row) = fwd.row(t + q - 1);
        g.backward.row(row) = bwd.row(t);
        g.episode.push_back(static_cast<int>(e));
        g.time.push_back(t);
      }
    }
  }
  return table;
}

// Standardized statistics S(q, j, l, c) = sqrt(n_q) * mean / sd, together
// with per-statistic means and standard deviations.
struct StatisticArray {
  std::vector<int> gaps;
  int forward_count = 0;
  int backward_count = 0;
  std::vector<std::size_t> tuple_counts;
  Vector values;
  Vector means;
  Vector std_devs;

  int per_gap() const { return 4 * forward_count * backward_count; }
  std::size_t index(std::size_t gap_index, int j, int l, Component c) const {
    return ((gap_index * forward_count + j) * backward_count + l) * 4 + static_cast<int>(c);
  }
};

struct AggregateResult {
  StatisticArray statistics;
  // Episode-level sums of centered contributions, one column per statistic,
  // scaled by 1 / (sqrt(n_q) * sd) so that the multiplier bootstrap draws are
  // on the same scale as the observed S.
  Matrix episode_blocks;
};

inline constexpr double kStdDevFloor = 1e-12;

inline AggregateResult aggregate_statistics(const ContributionTable& table) {
  const int J = table.forward_count;
  const int L = table.backward_count;
  AggregateResult out;
  auto& s = out.statistics;
  s.forward_count = J;
  s.backward_count = L;
  s.values.resize(table.statistic_count());
  s.means.resize(table.statistic_count());
  s.std_devs.resize(table.statistic_count());
  out.episode_blocks = Matrix::Zero(static_cast<Eigen::Index>(table.episode_count), table.statistic_count());

  for (std::size_t gi = 0; gi < table.gaps.size(); ++gi) {
    const auto& g = table.gaps[gi];
    const auto n = g.size();
    if (n < 2) {
      throw DataError("aggregate_statistics: gap q=" + std::to_string(g.gap) + " has " + std::to_string(n) +
                      " tuples, need at least 2");
    }
    s.gaps.push_back(g.gap);
    s.tuple_counts.push_back(n);
    // Means via one product; centered second pass for the variance.
    const Matrix mean = (g.forward.transpose() * g.backward) / static_cast<double>(n);
    Matrix sq = Matrix::Zero(2 * J, 2 * L);
    Matrix block = Matrix::Zero(2 * J, 2 * L);
    Matrix d(2 * J, 2 * L);
    int current = -1;
    auto flush = [&] {
      if (current < 0) return;
      for (int j = 0; j < J; ++j)
        for (int l = 0; l < L; ++l)
          for (int c = 0; c < 4; ++c)
            out.episode_blocks(current, s.index(gi, j, l, static_cast<Component>(c))) = block(2 * j + c / 2, 2 * l + c % 2);
      block.setZero();
    };
    for (std::size_t i = 0; i < n; ++i) {
      if (g.episode[i] != current) {
        flush();
        current = g.episode[i];
      }
      d.noalias() = g.forward.row(i).transpose() * g.backward.row(i);
      d -= mean;
      sq += d.cwiseProduct(d);
      block += d;
    }
    flush();
    const double root_n = std::sqrt(static_cast<double>(n));
    for (int j = 0; j < J; ++j)
      for (int l = 0; l < L; ++l)
        for (int c = 0; c < 4; ++c) {
          const int r = 2 * j + c / 2, k = 2 * l + c % 2;
          const auto idx = s.index(gi, j, l, static_cast<Component>(c));
          const double sd = std::max(std::sqrt(sq(r, k) / static_cast<double>(n - 1)), kStdDevFloor);
          s.means(idx) = mean(r, k);
          s.std_devs(idx) = sd;
          s.values(idx) = root_n * mean(r, k) / sd;
          out.episode_blocks.col(idx) /= root_n * sd;
        }
  }
  return out;
}

// Variant that averages fold-wise means instead of pooling all tuples; kept
// to compare against the pooled statistic. Standardized with the pooled sd.
inline Vector fold_average_statistics(const ContributionTable& table, const FoldAssignment& folds,
                                      const StatisticArray& pooled) {
  Vector out(table.statistic_count());
  const int K = folds.fold_count();
  for (std::size_t gi = 0; gi < table.gaps.size(); ++gi) {
    const auto& g = table.gaps[gi];
    std::vector<Matrix> sums(K, Matrix::Zero(2 * table.forward_count, 2 * table.backward_count));
    std::vector<double> counts(K, 0.0);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const int f = folds.fold_of(g.episode[i]);
      sums[f] += g.forward.row(i).transpose() * g.backward.row(i);
      counts[f] += 1.0;
    }
    Matrix avg = Matrix::Zero(2 * table.forward_count, 2 * table.backward_count);
    int used = 0;
    for (int f = 0; f < K; ++f) {
      if (counts[f] > 0) {
        avg += sums[f] / counts[f];
        ++used;
      }
    }
    avg /= std::max(used, 1);
    const double root_n = std::sqrt(static_cast<double>(g.size()));
    for (int j = 0; j < table.forward_count; ++j)
      for (int l = 0; l < table.backward_count; ++l)
        for (int c = 0; c < 4; ++c) {
          const auto idx = table.index(gi, j, l, static_cast<Component>(c));
          out(idx) = root_n * avg(2 * j + c / 2, 2 * l + c % 2) / pooled.std_devs(idx);
        }
  }
  return out;
}

}  // namespace mol
