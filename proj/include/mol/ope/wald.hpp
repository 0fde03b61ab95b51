#pragma once

#include <stdexcept>
#include <utility>

#include <boost/math/distributions/normal.hpp>

namespace mol {

// Standard normal quantile z_p.
inline double normal_quantile(double p) {
  if (!(p > 0 && p < 1)) throw std::invalid_argument("normal_quantile: p must be in (0, 1)");
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

struct Interval {
  double lower = 0;
  double upper = 0;
  double half_width() const { return (upper - lower) / 2; }
};

// estimate -/+ z_{1 - alpha/2} * se.
inline Interval wald_ci(double estimate, double se, double alpha) {
  if (!(se >= 0)) throw std::invalid_argument("wald_ci: se must be >= 0");
  if (!(alpha > 0 && alpha < 1)) throw std::invalid_argument("wald_ci: alpha must be in (0, 1)");
  const double h = normal_quantile(1 - alpha / 2) * se;
  return {estimate - h, estimate + h};
}

}  // namespace mol
