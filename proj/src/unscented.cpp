#include "kinv/unscented.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "kinv/errors.hpp"

namespace kinv {

UnscentedWeights compute_weights(int n_theta) {
  if (n_theta < 1) {
    throw Error(ErrorKind::InvalidDimension,
                "n_theta must be >= 1, got " + std::to_string(n_theta));
  }
  constexpr double kappa = 0.0;
  const double n = static_cast<double>(n_theta);
  UnscentedWeights w;
  w.n_theta = n_theta;
  w.a = std::min(std::sqrt(4.0 / (n + kappa)), 1.0);
  w.lambda = w.a * w.a * (n + kappa) - n;
  w.c = std::sqrt(n + w.lambda);
  w.w_c = 1.0 / (2.0 * (n + w.lambda));
  return w;
}

SigmaEnsemble generate_sigma_points(const GaussianBelief& belief) {
  const auto n = belief.dim();
  SigmaEnsemble ens;
  ens.weights = compute_weights(static_cast<int>(n));
  const Matrix lower = cholesky_factor(belief.covariance());
  const Vector& m = belief.mean();

  ens.points.resize(static_cast<std::size_t>(2 * n + 1));
  ens.points[0] = m;
  for (Eigen::Index j = 0; j < n; ++j) {
    const Vector offset = ens.weights.c * lower.col(j);
    ens.points[static_cast<std::size_t>(j + 1)] = m + offset;
    ens.points[static_cast<std::size_t>(j + 1 + n)] = m - offset;
  }
  return ens;
}

TransformEstimate transform_estimate(const SigmaEnsemble& ensemble,
                                     std::span<const Vector> images) {
  if (images.size() != ensemble.size() || images.empty()) {
    throw Error(ErrorKind::DimensionMismatch,
                "expected " + std::to_string(ensemble.size()) + " images, got " +
                    std::to_string(images.size()));
  }
  const auto ny = images.front().size();
  for (const auto& img : images) {
    if (img.size() != ny) {
      throw Error(ErrorKind::DimensionMismatch, "images have inconsistent lengths");
    }
  }
  const auto nt = ensemble.center().size();
  const double wc = ensemble.weights.w_c;

  TransformEstimate est;
  est.mean = images.front();
  est.cross_covariance = Matrix::Zero(nt, ny);
  est.covariance = Matrix::Zero(ny, ny);
  for (std::size_t j = 1; j < ensemble.size(); ++j) {
    const Vector dtheta = ensemble.points[j] - ensemble.center();
    const Vector dy = images[j] - est.mean;
    est.cross_covariance.noalias() += wc * dtheta * dy.transpose();
    est.covariance.noalias() += wc * dy * dy.transpose();
  }
  est.covariance = symmetrize(est.covariance);
  return est;
}

}  // namespace kinv
