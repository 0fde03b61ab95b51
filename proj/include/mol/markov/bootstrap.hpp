#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "mol/core/parallel.hpp"
#include "mol/core/rng.hpp"
#include "mol/core/types.hpp"

namespace mol {

struct BootstrapResult {
  double threshold = 0;
  double p_value = 1;
  int replications = 0;
  std::vector<std::string> warnings;
};

// Replicates are drawn in fixed chunks so the floating-point work per
// replicate does not depend on how chunks are spread over workers.
inline constexpr int kBootstrapChunk = 64;

// Bootstrap maxima max_s |sum_e w_e * blocks(e, s)| with one standard normal
// multiplier per row (episode) of `blocks`. Replicate b uses its own stream.
inline std::vector<double> bootstrap_maxima(const Matrix& blocks, int replications, std::uint64_t seed,
                                            unsigned workers = 1) {
  if (replications < 1) throw std::invalid_argument("multiplier_bootstrap: B must be >= 1");
  std::vector<double> maxima(replications, 0.0);
  const int chunks = (replications + kBootstrapChunk - 1) / kBootstrapChunk;
  const auto n = blocks.rows();
  parallel_for(static_cast<std::size_t>(chunks), workers, [&](std::size_t chunk) {
    const int first = static_cast<int>(chunk) * kBootstrapChunk;
    const int count = std::min(kBootstrapChunk, replications - first);
    Matrix w(count, n);
    for (int r = 0; r < count; ++r) {
      auto eng = rng::stream(seed, "multiplier", static_cast<std::uint64_t>(first + r));
      std::normal_distribution<double> normal;
      for (Eigen::Index e = 0; e < n; ++e) w(r, e) = normal(eng);
    }
    const Matrix draws = w * blocks;
    for (int r = 0; r < count; ++r) maxima[first + r] = draws.cols() > 0 ? draws.row(r).cwiseAbs().maxCoeff() : 0.0;
  });
  return maxima;
}

// Threshold and p-value for an observed max statistic.
//   p = (1 + #{b : M*_b >= M}) / (B + 1)
//   threshold = the floor(alpha (B + 1))-th largest M*_b
// With these conventions M > threshold exactly when p <= alpha.
inline BootstrapResult calibrate(std::vector<double> maxima, double observed_max, double alpha) {
  BootstrapResult out;
  const int B = static_cast<int>(maxima.size());
  out.replications = B;
  const auto exceed = std::count_if(maxima.begin(), maxima.end(), [&](double m) { return m >= observed_max; });
  out.p_value = (1.0 + static_cast<double>(exceed)) / (B + 1.0);
  const int rank = static_cast<int>(std::floor(alpha * (B + 1.0)));
  if (rank < 1) {
    out.threshold = std::numeric_limits<double>::infinity();
  } else {
    const int k = std::min(rank, B);
    std::nth_element(maxima.begin(), maxima.begin() + (k - 1), maxima.end(), std::greater<>());
    out.threshold = maxima[k - 1];
  }
  if (B < 100) out.warnings.push_back("bootstrap uses B=" + std::to_string(B) + " < 100 replications");
  return out;
}

inline BootstrapResult multiplier_bootstrap(const Matrix& blocks, double observed_max, int replications, double alpha,
                                            std::uint64_t seed, unsigned workers = 1) {
  if (!(alpha > 0 && alpha < 1)) throw std::invalid_argument("multiplier_bootstrap: alpha must be in (0, 1)");
  return calibrate(bootstrap_maxima(blocks, replications, seed, workers), observed_max, alpha);
}

}  // namespace mol
