#pragma once

#include <algorithm>
#include <memory>
#include <string>
#include <stdexcept>
#include <utility>

#include <nlohmann/json.hpp>

#include "mol/core/types.hpp"
#include "mol/regress/basis.hpp"

namespace mol {

// Immutable conditional-mean map: predict(x) = (psi(x) - center) * coef + intercept.
class FittedRegressor {
 public:
  FittedRegressor(std::shared_ptr<const Basis> basis, RowVector center, Matrix coef, RowVector intercept)
      : basis_(std::move(basis)), center_(std::move(center)), coef_(std::move(coef)), intercept_(std::move(intercept)) {
    if (center_.size() != basis_->size() || coef_.rows() != basis_->size() || coef_.cols() != intercept_.size()) {
      throw std::invalid_argument("FittedRegressor: inconsistent shapes");
    }
  }

  int input_dim() const { return basis_->input_dim(); }
  int output_dim() const { return static_cast<int>(intercept_.size()); }
  const Basis& basis() const { return *basis_; }
  const std::shared_ptr<const Basis>& basis_ptr() const { return basis_; }
  const RowVector& center() const { return center_; }
  const Matrix& coefficients() const { return coef_; }
  const RowVector& intercept() const { return intercept_; }

  Matrix design(const Matrix& inputs) const {
    if (inputs.cols() != input_dim()) {
      throw std::invalid_argument("predict: input has " + std::to_string(inputs.cols()) + " columns, model expects " +
                                  std::to_string(input_dim()));
    }
    Matrix psi = basis_->expand(inputs);
    psi.rowwise() -= center_;
    return psi;
  }

  // Prediction on an already expanded and centered design (see design()).
  Matrix predict_design(const Matrix& design) const {
    Matrix out = design * coef_;
    out.rowwise() += intercept_;
    return out;
  }

  Matrix predict(const Matrix& inputs) const {
    if (inputs.rows() == 0) {
      if (inputs.cols() != input_dim()) throw std::invalid_argument("predict: dimension mismatch");
      return Matrix(0, output_dim());
    }
    return predict_design(design(inputs));
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["basis"] = basis_->to_json();
    j["center"] = std::vector<double>(center_.data(), center_.data() + center_.size());
    auto coef = nlohmann::json::array();
    for (int r = 0; r < coef_.rows(); ++r) {
      std::vector<double> row(coef_.cols());
      for (int c = 0; c < coef_.cols(); ++c) row[c] = coef_(r, c);
      coef.push_back(std::move(row));
    }
    j["coefficients"] = std::move(coef);
    j["intercept"] = std::vector<double>(intercept_.data(), intercept_.data() + intercept_.size());
    return j;
  }

  static FittedRegressor from_json(const nlohmann::json& j) {
    auto basis = basis_from_json(j.at("basis"));
    auto center = j.at("center").get<std::vector<double>>();
    auto intercept = j.at("intercept").get<std::vector<double>>();
    const auto& rows = j.at("coefficients");
    Matrix coef(static_cast<int>(rows.size()), static_cast<int>(intercept.size()));
    for (int r = 0; r < coef.rows(); ++r)
      for (int c = 0; c < coef.cols(); ++c) coef(r, c) = rows.at(r).at(c).get<double>();
    return FittedRegressor(std::move(basis), Eigen::Map<RowVector>(center.data(), center.size()), std::move(coef),
                           Eigen::Map<RowVector>(intercept.data(), intercept.size()));
  }

 private:
  std::shared_ptr<const Basis> basis_;
  RowVector center_;
  Matrix coef_;
  RowVector intercept_;
};

// Penalized least squares on a fixed design, factorized once:
//   (Psi_c' Psi_c + n * penalty * I) coef = Psi_c' (Y - Ybar)
// with Psi_c the (optionally) column-centered expansion. Any number of target
// matrices can then be fitted against the same factorization.
class PreparedRidge {
 public:
  // Penalty used in place of 0 when the unpenalized system is singular.
  static constexpr double kPenaltyFloor = 1e-10;

  PreparedRidge(std::shared_ptr<const Basis> basis, const Matrix& inputs, double penalty, bool centered)
      : basis_(std::move(basis)), centered_(centered) {
    if (inputs.rows() < 1) throw std::invalid_argument("ridge: need at least one row");
    if (inputs.cols() != basis_->input_dim()) throw std::invalid_argument("ridge: input dimension mismatch");
    if (!inputs.allFinite()) throw std::invalid_argument("ridge: non-finite input");
    if (penalty < 0) throw std::invalid_argument("ridge: negative penalty");
    design_ = basis_->expand(inputs);
    const auto n = static_cast<double>(inputs.rows());
    center_ = centered_ ? RowVector(design_.colwise().mean()) : RowVector::Zero(design_.cols());
    design_.rowwise() -= center_;
    const auto d = design_.cols();
    if (d == 0) {
      penalty_ = penalty;
      return;
    }
    Matrix gram = Matrix::Zero(d, d);
    gram.selfadjointView<Eigen::Lower>().rankUpdate(design_.transpose());
    gram.triangularView<Eigen::StrictlyUpper>() = gram.transpose();
    penalty_ = penalty;
    solver_.compute(gram + (n * penalty_) * Matrix::Identity(d, d));
    if (singular()) {
      penalty_ = std::max(penalty, kPenaltyFloor);
      solver_.compute(gram + (n * penalty_) * Matrix::Identity(d, d));
    }
  }

  FittedRegressor fit(const Matrix& targets) const {
    if (targets.rows() != design_.rows()) throw std::invalid_argument("ridge: target rows do not match inputs");
    if (!targets.allFinite()) throw std::invalid_argument("ridge: non-finite target");
    RowVector mean = centered_ ? RowVector(targets.colwise().mean()) : RowVector::Zero(targets.cols());
    Matrix coef;
    if (design_.cols() == 0) {
      coef = Matrix(0, targets.cols());
    } else {
      coef = solver_.solve(design_.transpose() * (targets.rowwise() - mean));
    }
    return FittedRegressor(basis_, center_, std::move(coef), std::move(mean));
  }

  // Centered expansion of new inputs, compatible with fitted coefficients.
  Matrix design(const Matrix& inputs) const {
    Matrix psi = basis_->expand(inputs);
    psi.rowwise() -= center_;
    return psi;
  }

  const Matrix& training_design() const { return design_; }
  const std::shared_ptr<const Basis>& basis() const { return basis_; }
  int rows() const { return static_cast<int>(design_.rows()); }
  double penalty_used() const { return penalty_; }

 private:
  bool singular() const {
    if (solver_.info() != Eigen::Success) return true;
    const auto& dvec = solver_.vectorD();
    const double top = dvec.cwiseAbs().maxCoeff();
    return !(dvec.minCoeff() > 1e-13 * std::max(top, 1e-300));
  }

  std::shared_ptr<const Basis> basis_;
  bool centered_;
  Matrix design_;
  RowVector center_;
  double penalty_ = 0;
  Eigen::LDLT<Matrix> solver_;
};

}  // namespace mol
