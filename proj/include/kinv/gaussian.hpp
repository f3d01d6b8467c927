#pragma once

#include <Eigen/Dense>

namespace kinv {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// N(mean, covariance) over the parameter space. The covariance is stored
/// symmetrized; positive definiteness is checked where a factor is needed.
class GaussianBelief {
 public:
  GaussianBelief(Vector mean, Matrix covariance);

  const Vector& mean() const noexcept { return mean_; }
  const Matrix& covariance() const noexcept { return covariance_; }
  Eigen::Index dim() const noexcept { return mean_.size(); }

 private:
  Vector mean_;
  Matrix covariance_;
};

/// Joint Gaussian of (theta, y) kept in block form:
///   [ cov_theta      cov_theta_y ]
///   [ cov_theta_y^T  cov_y       ]
struct JointGaussian {
  Vector mean_theta;
  Vector mean_y;
  Matrix cov_theta;
  Matrix cov_theta_y;
  Matrix cov_y;
};

Matrix symmetrize(const Matrix& m);

/// Lower-triangular L with L L^T = C. The input is symmetrized first; on a
/// pivot failure a diagonal jitter delta * trace(C)/n is added with delta
/// escalating 1e-12, 1e-10, 1e-8 before giving up with NonPositiveDefinite.
Matrix cholesky_factor(const Matrix& c);

bool is_spd(const Matrix& c);

/// Posterior of theta given y = `y` under the joint Gaussian. Solves through
/// the Cholesky factor of cov_y; no explicit inverse is formed.
GaussianBelief condition_gaussian(const JointGaussian& joint, const Vector& y);

/// KL(p || q) for two Gaussians of equal dimension.
double gaussian_kl(const GaussianBelief& p, const GaussianBelief& q);

}  // namespace kinv
