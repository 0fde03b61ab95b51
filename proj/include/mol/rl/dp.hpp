#pragma once

#include <stdexcept>
#include <vector>

#include "mol/envs/policy.hpp"
#include "mol/envs/tabular.hpp"
#include "mol/regress/basis.hpp"
#include "mol/rl/qfunction.hpp"

namespace mol {

struct DpResult {
  Vector values;  // V(s)
  Matrix q;       // Q(s, a)
  double value = 0;  // J = sum_s initial(s) V(s)
  int iterations = 0;
};

struct DpOptimal : DpResult {
  std::vector<int> greedy;  // lowest-index argmax of Q(s, .)
};

namespace detail {

inline Matrix bellman_q(const TabularMdp& mdp, const Vector& v, double gamma) {
  Matrix q(mdp.state_count(), mdp.action_count());
  for (int a = 0; a < mdp.action_count(); ++a) q.col(a) = mdp.rewards.col(a) + gamma * mdp.transitions[a] * v;
  return q;
}

// Stops once the sup-norm error bound gamma / (1 - gamma) * |V_k - V_{k-1}| is below tol.
template <class Update>
DpResult iterate_values(const TabularMdp& mdp, double gamma, double tol, Update update) {
  if (!(gamma > 0 && gamma < 1)) throw std::invalid_argument("dp: gamma must be in (0, 1)");
  mdp.validate();
  DpResult out;
  out.values = Vector::Zero(mdp.state_count());
  for (;;) {
    Vector next = update(bellman_q(mdp, out.values, gamma));
    const double change = (next - out.values).cwiseAbs().maxCoeff();
    out.values = std::move(next);
    ++out.iterations;
    if (gamma / (1 - gamma) * change < tol) break;
  }
  out.q = bellman_q(mdp, out.values, gamma);
  out.value = mdp.initial.dot(out.values);
  return out;
}

}  // namespace detail

// Exact V of a stationary policy given as S x A probabilities.
inline DpResult dp_policy_value(const TabularMdp& mdp, const Matrix& policy, double gamma, double tol = 1e-10) {
  if (policy.rows() != mdp.state_count() || policy.cols() != mdp.action_count()) {
    throw std::invalid_argument("dp_policy_value: policy table shape");
  }
  return detail::iterate_values(mdp, gamma, tol, [&](const Matrix& q) -> Vector {
    return q.cwiseProduct(policy).rowwise().sum();
  });
}

inline DpResult dp_policy_value(const TabularMdp& mdp, const Policy& policy, double gamma, double tol = 1e-10) {
  return dp_policy_value(mdp, mdp.policy_table(policy), gamma, tol);
}

inline DpOptimal dp_optimal(const TabularMdp& mdp, double gamma, double tol = 1e-10) {
  DpOptimal out;
  static_cast<DpResult&>(out) = detail::iterate_values(mdp, gamma, tol, [](const Matrix& q) -> Vector {
    return q.rowwise().maxCoeff();
  });
  out.greedy.assign(mdp.state_count(), 0);
  for (int s = 0; s < mdp.state_count(); ++s)
    for (int a = 1; a < mdp.action_count(); ++a)
      if (out.q(s, a) > out.q(s, out.greedy[s])) out.greedy[s] = a;
  return out;
}

// S x A one-hot table of a deterministic tabular policy.
inline Matrix deterministic_table(const std::vector<int>& actions, int action_count) {
  Matrix p = Matrix::Zero(static_cast<Eigen::Index>(actions.size()), action_count);
  for (std::size_t s = 0; s < actions.size(); ++s) p(s, actions[s]) = 1.0;
  return p;
}

// Q table of a tabular MDP as a QFunction over its state observations. States
// sharing an observation row must share Q values; unseen observations get 0.
inline QFunction tabular_q_function(const TabularMdp& mdp, const Matrix& q) {
  auto basis = std::make_shared<CellIndicatorBasis>(CellIndicatorBasis::from_rows(mdp.observations));
  std::vector<FittedRegressor> models;
  for (int a = 0; a < mdp.action_count(); ++a) {
    Matrix coef = Matrix::Zero(basis->size(), 1);
    for (int s = 0; s < mdp.state_count(); ++s) {
      coef(basis->cell_of(mdp.observations.data() + s, mdp.observations.outerStride()), 0) = q(s, a);
    }
    models.emplace_back(basis, RowVector::Zero(basis->size()), std::move(coef), RowVector::Zero(1));
  }
  return QFunction(std::move(models));
}

// Q identically zero.
inline QFunction zero_q_function(int input_dim, int action_count) {
  auto basis = std::make_shared<EmptyBasis>(input_dim);
  std::vector<FittedRegressor> models;
  for (int a = 0; a < action_count; ++a) models.emplace_back(basis, RowVector(0), Matrix(0, 1), RowVector::Zero(1));
  return QFunction(std::move(models));
}

}  // namespace mol
