#pragma once

#include <span>
#include <vector>

#include "kinv/gaussian.hpp"

namespace kinv {

/// Weights of the modified unscented transform with kappa = 0:
///   a = min(sqrt(4 / n), 1), lambda = a^2 n - n,
///   c = sqrt(n + lambda), w_c = 1 / (2 (n + lambda)).
struct UnscentedWeights {
  int n_theta = 0;
  double a = 0.0;
  double lambda = 0.0;
  double c = 0.0;
  double w_c = 0.0;
};

UnscentedWeights compute_weights(int n_theta);

/// 2n+1 points: point 0 is the mean, points j and j+n sit at
/// mean +/- c * (column j of the lower Cholesky factor).
struct SigmaEnsemble {
  std::vector<Vector> points;
  UnscentedWeights weights;

  std::size_t size() const noexcept { return points.size(); }
  const Vector& center() const { return points.front(); }
};

SigmaEnsemble generate_sigma_points(const GaussianBelief& belief);

struct TransformEstimate {
  Vector mean;             // image of the central point
  Matrix cross_covariance; // n_theta x n_y
  Matrix covariance;       // n_y x n_y
};

/// Mean, cross-covariance and covariance of the transformed ensemble. The
/// mean is the image of point 0, not a weighted average. Sums run over
/// j = 1..2n in ascending order.
TransformEstimate transform_estimate(const SigmaEnsemble& ensemble,
                                     std::span<const Vector> images);

}  // namespace kinv
