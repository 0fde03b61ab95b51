#pragma once

#include <cmath>
#include <map>
#include <memory>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mol/core/types.hpp"

namespace mol {

// A fixed feature expansion x -> psi(x). Regressors in this library are
// linear in some basis, which lets a prepared design be reused across many
// right-hand sides (all test functions at once, all FQI iterations).
class Basis {
 public:
  virtual ~Basis() = default;
  virtual int input_dim() const = 0;
  virtual int size() const = 0;
  virtual Matrix expand(const Matrix& inputs) const = 0;
  virtual nlohmann::json to_json() const = 0;
};

// phi(x) = sqrt(2/D) cos(W x + b).
class RandomFourierBasis final : public Basis {
 public:
  RandomFourierBasis(Matrix frequencies, Vector phases, double bandwidth)
      : frequencies_(std::move(frequencies)), phases_(std::move(phases)), bandwidth_(bandwidth) {
    if (frequencies_.rows() != phases_.size()) throw std::invalid_argument("RandomFourierBasis: shape mismatch");
  }

  int input_dim() const override { return static_cast<int>(frequencies_.cols()); }
  int size() const override { return static_cast<int>(frequencies_.rows()); }
  double bandwidth() const { return bandwidth_; }
  const Matrix& frequencies() const { return frequencies_; }
  const Vector& phases() const { return phases_; }

  Matrix expand(const Matrix& inputs) const override {
    Matrix z = inputs * frequencies_.transpose();
    z.rowwise() += phases_.transpose();
    const double scale = std::sqrt(2.0 / static_cast<double>(size()));
    return (z.array().cos() * scale).matrix();
  }

  nlohmann::json to_json() const override {
    nlohmann::json j;
    j["kind"] = "random-fourier";
    j["bandwidth"] = bandwidth_;
    auto w = nlohmann::json::array();
    for (int r = 0; r < frequencies_.rows(); ++r) {
      std::vector<double> row(frequencies_.cols());
      for (int c = 0; c < frequencies_.cols(); ++c) row[c] = frequencies_(r, c);
      w.push_back(std::move(row));
    }
    j["frequencies"] = std::move(w);
    j["phases"] = std::vector<double>(phases_.data(), phases_.data() + phases_.size());
    return j;
  }

 private:
  Matrix frequencies_;
  Vector phases_;
  double bandwidth_;
};

// Indicator of exact input rows seen at construction; unseen rows expand to zero.
class CellIndicatorBasis final : public Basis {
 public:
  CellIndicatorBasis(int input_dim, std::vector<std::vector<double>> cells) : input_dim_(input_dim) {
    for (auto& c : cells) {
      if (static_cast<int>(c.size()) != input_dim_) throw std::invalid_argument("CellIndicatorBasis: bad cell");
      index_.emplace(std::move(c), static_cast<int>(index_.size()));
    }
  }

  static CellIndicatorBasis from_rows(const Matrix& inputs) {
    std::vector<std::vector<double>> cells;
    std::map<std::vector<double>, int> seen;
    for (int i = 0; i < inputs.rows(); ++i) {
      std::vector<double> key(inputs.cols());
      for (int j = 0; j < inputs.cols(); ++j) key[j] = inputs(i, j);
      if (seen.emplace(key, 0).second) cells.push_back(std::move(key));
    }
    return CellIndicatorBasis(static_cast<int>(inputs.cols()), std::move(cells));
  }

  int input_dim() const override { return input_dim_; }
  int size() const override { return static_cast<int>(index_.size()); }

  int cell_of(const double* row, Eigen::Index stride) const {
    std::vector<double> key(input_dim_);
    for (int j = 0; j < input_dim_; ++j) key[j] = row[j * stride];
    auto it = index_.find(key);
    return it == index_.end() ? -1 : it->second;
  }

  Matrix expand(const Matrix& inputs) const override {
    Matrix out = Matrix::Zero(inputs.rows(), size());
    for (int i = 0; i < inputs.rows(); ++i) {
      int c = cell_of(inputs.data() + i, inputs.outerStride());
      if (c >= 0) out(i, c) = 1.0;
    }
    return out;
  }

  nlohmann::json to_json() const override {
    std::vector<std::vector<double>> cells(index_.size());
    for (const auto& [key, i] : index_) cells[i] = key;
    return {{"kind", "cell-indicator"}, {"input_dim", input_dim_}, {"cells", cells}};
  }

 private:
  int input_dim_;
  std::map<std::vector<double>, int> index_;
};

// No features: models built on it predict a constant.
class EmptyBasis final : public Basis {
 public:
  explicit EmptyBasis(int input_dim) : input_dim_(input_dim) {}
  int input_dim() const override { return input_dim_; }
  int size() const override { return 0; }
  Matrix expand(const Matrix& inputs) const override { return Matrix(inputs.rows(), 0); }
  nlohmann::json to_json() const override { return {{"kind", "empty"}, {"input_dim", input_dim_}}; }

 private:
  int input_dim_;
};

inline std::shared_ptr<const Basis> basis_from_json(const nlohmann::json& j) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "random-fourier") {
    const auto& w = j.at("frequencies");
    const auto& b = j.at("phases");
    const int rows = static_cast<int>(w.size());
    const int cols = rows > 0 ? static_cast<int>(w.at(0).size()) : 0;
    Matrix freq(rows, cols);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) freq(r, c) = w.at(r).at(c).get<double>();
    Vector phases(rows);
    for (int r = 0; r < rows; ++r) phases(r) = b.at(r).get<double>();
    return std::make_shared<RandomFourierBasis>(std::move(freq), std::move(phases), j.at("bandwidth").get<double>());
  }
  if (kind == "cell-indicator") {
    return std::make_shared<CellIndicatorBasis>(j.at("input_dim").get<int>(),
                                                j.at("cells").get<std::vector<std::vector<double>>>());
  }
  if (kind == "empty") return std::make_shared<EmptyBasis>(j.at("input_dim").get<int>());
  throw std::invalid_argument("unknown basis kind '" + kind + "'");
}

}  // namespace mol
