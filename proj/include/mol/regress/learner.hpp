#pragma once

#include <algorithm>
#include <cstdint>
#include <memory>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mol/core/errors.hpp"
#include "mol/core/rng.hpp"
#include "mol/regress/basis.hpp"
#include "mol/regress/ridge.hpp"

namespace mol {

// Hyperparameters of the random-feature ridge regressor.
struct RegressorSpec {
  int num_features = 200;
  std::optional<double> bandwidth;  // nullopt: median heuristic
  double penalty = 1e-3;
  std::uint64_t seed = 0;

  void validate() const {
    if (num_features < 1) throw ConfigError("regressor: num_features must be >= 1");
    if (penalty < 0) throw ConfigError("regressor: penalty must be >= 0");
    if (bandwidth && !(*bandwidth > 0)) throw ConfigError("regressor: bandwidth must be > 0");
  }
};

inline void to_json(nlohmann::json& j, const RegressorSpec& s) {
  j = nlohmann::json{{"num_features", s.num_features},
                     {"bandwidth", s.bandwidth ? nlohmann::json(*s.bandwidth) : nlohmann::json("median-heuristic")},
                     {"penalty", s.penalty},
                     {"seed", s.seed}};
}

// Median pairwise Euclidean distance over at most `cap` rows drawn without
// replacement. Falls back to 1 when there are no pairs or the median is 0.
inline double median_heuristic_bandwidth(const Matrix& inputs, std::uint64_t seed, int cap = 500) {
  const int n = static_cast<int>(inputs.rows());
  std::vector<int> rows(n);
  for (int i = 0; i < n; ++i) rows[i] = i;
  if (n > cap) {
    auto eng = rng::stream(seed, "median-subsample");
    for (int i = 0; i < cap; ++i) {
      std::uniform_int_distribution<int> pick(i, n - 1);
      std::swap(rows[i], rows[pick(eng)]);
    }
    rows.resize(cap);
  }
  std::vector<double> dist;
  dist.reserve(rows.size() * (rows.size() - (rows.empty() ? 0 : 1)) / 2);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = i + 1; j < rows.size(); ++j) dist.push_back((inputs.row(rows[i]) - inputs.row(rows[j])).norm());
  if (dist.empty()) return 1.0;
  const auto mid = dist.size() / 2;
  std::nth_element(dist.begin(), dist.begin() + mid, dist.end());
  double median = dist[mid];
  if (dist.size() % 2 == 0) {
    median = 0.5 * (median + *std::max_element(dist.begin(), dist.begin() + mid));
  }
  return (median > 0 && std::isfinite(median)) ? median : 1.0;
}

// Something that turns training inputs into a factorized linear smoother.
// Implementations differ only in the basis and the penalty they choose; a
// tree learner would plug in as a leaf-indicator basis.
class Learner {
 public:
  virtual ~Learner() = default;

  // `stream` salts any randomness so repeated uses (folds, actions) get
  // distinct but reproducible feature maps; 0 means "use the base seed".
  virtual PreparedRidge prepare(const Matrix& inputs, std::uint64_t stream = 0) const = 0;
  virtual nlohmann::json describe() const = 0;

  FittedRegressor fit(const Matrix& inputs, const Matrix& targets, std::uint64_t stream = 0) const {
    return prepare(inputs, stream).fit(targets);
  }
};

class RandomFeatureRidge final : public Learner {
 public:
  explicit RandomFeatureRidge(RegressorSpec spec) : spec_(spec) { spec_.validate(); }

  const RegressorSpec& spec() const { return spec_; }

  std::shared_ptr<const RandomFourierBasis> make_basis(const Matrix& inputs, std::uint64_t stream = 0) const {
    const auto seed = stream == 0 ? spec_.seed : rng::derive(spec_.seed, stream);
    const double sigma = spec_.bandwidth ? *spec_.bandwidth : median_heuristic_bandwidth(inputs, seed);
    const int d = spec_.num_features;
    const int p = static_cast<int>(inputs.cols());
    Matrix freq(d, p);
    Vector phases(d);
    auto eng_w = rng::stream(seed, "frequencies");
    auto eng_b = rng::stream(seed, "phases");
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> uniform(0.0, 2.0 * std::numbers::pi);
    for (int r = 0; r < d; ++r)
      for (int c = 0; c < p; ++c) freq(r, c) = normal(eng_w) / sigma;
    for (int r = 0; r < d; ++r) phases(r) = uniform(eng_b);
    return std::make_shared<RandomFourierBasis>(std::move(freq), std::move(phases), sigma);
  }

  PreparedRidge prepare(const Matrix& inputs, std::uint64_t stream = 0) const override {
    if (!inputs.allFinite()) throw std::invalid_argument("fit: non-finite input");
    return PreparedRidge(make_basis(inputs, stream), inputs, spec_.penalty, true);
  }

  nlohmann::json describe() const override {
    nlohmann::json j = spec_;
    j["kind"] = "random-feature-ridge";
    return j;
  }

 private:
  RegressorSpec spec_;
};

// Cell means over exact input values (tabular regression).
class TabularMean final : public Learner {
 public:
  PreparedRidge prepare(const Matrix& inputs, std::uint64_t = 0) const override {
    auto basis = std::make_shared<CellIndicatorBasis>(CellIndicatorBasis::from_rows(inputs));
    return PreparedRidge(std::move(basis), inputs, 0.0, false);
  }
  nlohmann::json describe() const override { return {{"kind", "tabular-mean"}}; }
};

// Ignores inputs and predicts the training mean.
class ConstantMean final : public Learner {
 public:
  PreparedRidge prepare(const Matrix& inputs, std::uint64_t = 0) const override {
    return PreparedRidge(std::make_shared<EmptyBasis>(static_cast<int>(inputs.cols())), inputs, 0.0, true);
  }
  nlohmann::json describe() const override { return {{"kind", "constant-mean"}}; }
};

// Random-feature ridge fit: one factorization shared by all target columns.
inline FittedRegressor fit(const RegressorSpec& spec, const Matrix& inputs, const Matrix& targets) {
  return RandomFeatureRidge(spec).fit(inputs, targets);
}

inline Matrix predict(const FittedRegressor& model, const Matrix& inputs) { return model.predict(inputs); }

}  // namespace mol
