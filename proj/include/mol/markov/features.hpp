#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>

#include "mol/core/rng.hpp"
#include "mol/core/types.hpp"
#include "mol/data/types.hpp"

namespace mol {

// Frozen frequencies of the characteristic-function test functions:
// g_j(x) = (cos, sin)(mu_j' x) on the forward side, h_l likewise with nu_l.
struct FeatureBank {
  Matrix forward;   // J x forward input dim
  Matrix backward;  // L x backward input dim

  int forward_count() const { return static_cast<int>(forward.rows()); }
  int backward_count() const { return static_cast<int>(backward.rows()); }
};

namespace detail {

inline FeatureBank draw_bank(int forward_dim, int backward_dim, int forward_count, int backward_count,
                             std::uint64_t seed) {
  if (forward_count < 1 || backward_count < 1) throw std::invalid_argument("feature bank: J and L must be >= 1");
  FeatureBank bank{Matrix(forward_count, forward_dim), Matrix(backward_count, backward_dim)};
  auto eng = rng::stream(seed, "feature-bank");
  std::normal_distribution<double> normal;
  for (int r = 0; r < forward_count; ++r)
    for (int c = 0; c < forward_dim; ++c) bank.forward(r, c) = normal(eng);
  for (int r = 0; r < backward_count; ++r)
    for (int c = 0; c < backward_dim; ++c) bank.backward(r, c) = normal(eng);
  return bank;
}

}  // namespace detail

// Bank for a first-order dataset: forward frequencies over observations,
// backward frequencies over observation + one-hot action.
inline FeatureBank build_feature_bank(int obs_dim, int action_count, int forward_count, int backward_count,
                                      std::uint64_t seed) {
  return detail::draw_bank(obs_dim, obs_dim + action_count, forward_count, backward_count, seed);
}

// Bank sized for a (possibly lag-augmented) layout: forward frequencies act on
// the fresh coordinates, backward ones on the stale block.
inline FeatureBank build_feature_bank(const ObservationLayout& layout, int forward_count, int backward_count,
                                      std::uint64_t seed) {
  return detail::draw_bank(layout.fresh_dim(), layout.stale_dim(), forward_count, backward_count, seed);
}

// (cos(mu_1'x), sin(mu_1'x), cos(mu_2'x), ...) for every row of `inputs`.
inline Matrix char_features(const Matrix& inputs, const Matrix& freqs) {
  if (inputs.cols() != freqs.cols()) throw std::invalid_argument("char_features: dimension mismatch");
  const Matrix z = inputs * freqs.transpose();
  Matrix out(inputs.rows(), 2 * freqs.rows());
  for (int j = 0; j < freqs.rows(); ++j) {
    out.col(2 * j) = z.col(j).array().cos().matrix();
    out.col(2 * j + 1) = z.col(j).array().sin().matrix();
  }
  return out;
}

inline Vector char_features(const Vector& x, const Matrix& freqs) {
  if (x.size() != freqs.cols()) throw std::invalid_argument("char_features: dimension mismatch");
  return char_features(Matrix(x.transpose()), freqs).row(0).transpose();
}

}  // namespace mol
