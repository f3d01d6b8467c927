#include "kinv/gaussian.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "kinv/errors.hpp"

namespace kinv {
namespace {

void require_square(const Matrix& m, const char* what) {
  if (m.rows() != m.cols()) {
    throw Error(ErrorKind::DimensionMismatch,
                std::string(what) + " is " + std::to_string(m.rows()) + "x" +
                    std::to_string(m.cols()) + ", expected square");
  }
}

// Returns false on a non-positive or non-finite pivot.
bool try_llt(const Matrix& c, Matrix& lower) {
  Eigen::LLT<Matrix> llt(c);
  if (llt.info() != Eigen::Success) return false;
  lower = llt.matrixL();
  return lower.allFinite() && (lower.diagonal().array() > 0.0).all();
}

double log_det_from_factor(const Matrix& lower) {
  return 2.0 * lower.diagonal().array().log().sum();
}

}  // namespace

GaussianBelief::GaussianBelief(Vector mean, Matrix covariance)
    : mean_(std::move(mean)), covariance_(std::move(covariance)) {
  require_square(covariance_, "covariance");
  if (covariance_.rows() != mean_.size()) {
    throw Error(ErrorKind::DimensionMismatch,
                "mean has length " + std::to_string(mean_.size()) +
                    " but covariance is " + std::to_string(covariance_.rows()) +
                    "x" + std::to_string(covariance_.cols()));
  }
  if (mean_.size() == 0) {
    throw Error(ErrorKind::InvalidDimension, "empty belief");
  }
  covariance_ = symmetrize(covariance_);
}

Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

Matrix cholesky_factor(const Matrix& c) {
  require_square(c, "matrix to factor");
  if (!c.allFinite()) {
    throw Error(ErrorKind::NonPositiveDefinite, "matrix has non-finite entries");
  }
  const Matrix sym = symmetrize(c);
  Matrix lower;
  if (try_llt(sym, lower)) return lower;

  const auto n = static_cast<double>(sym.rows());
  const double scale = std::abs(sym.trace()) / n;
  constexpr std::array<double, 3> kJitter{1e-12, 1e-10, 1e-8};
  for (double delta : kJitter) {
    Matrix jittered = sym;
    jittered.diagonal().array() += delta * scale;
    if (try_llt(jittered, lower)) return lower;
  }
  throw Error(ErrorKind::NonPositiveDefinite,
              "Cholesky pivot failure persists after jitter 1e-8 * trace/n");
}

bool is_spd(const Matrix& c) {
  if (c.rows() != c.cols() || !c.allFinite()) return false;
  const double asym = (c - c.transpose()).norm();
  if (asym > 1e-12 * std::max(1.0, c.norm())) return false;
  Matrix lower;
  return try_llt(c, lower);
}

GaussianBelief condition_gaussian(const JointGaussian& joint, const Vector& y) {
  const auto nt = joint.mean_theta.size();
  const auto ny = joint.mean_y.size();
  if (joint.cov_theta.rows() != nt || joint.cov_theta.cols() != nt ||
      joint.cov_theta_y.rows() != nt || joint.cov_theta_y.cols() != ny ||
      joint.cov_y.rows() != ny || joint.cov_y.cols() != ny || y.size() != ny) {
    throw Error(ErrorKind::DimensionMismatch, "joint Gaussian blocks do not agree");
  }
  const Matrix lower = cholesky_factor(joint.cov_y);
  const auto tri = lower.triangularView<Eigen::Lower>();
  // W = L^{-1} C^{p theta}, so C^{theta p} (C^{pp})^{-1} C^{p theta} = W^T W.
  const Matrix w = tri.solve(joint.cov_theta_y.transpose());
  const Vector innovation = tri.solve(y - joint.mean_y);
  Vector mean = joint.mean_theta + w.transpose() * innovation;
  Matrix cov = symmetrize(joint.cov_theta - w.transpose() * w);
  return GaussianBelief(std::move(mean), std::move(cov));
}

double gaussian_kl(const GaussianBelief& p, const GaussianBelief& q) {
  if (p.dim() != q.dim()) {
    throw Error(ErrorKind::DimensionMismatch,
                "KL between dimensions " + std::to_string(p.dim()) + " and " +
                    std::to_string(q.dim()));
  }
  const Matrix lp = cholesky_factor(p.covariance());
  const Matrix lq = cholesky_factor(q.covariance());
  const auto tq = lq.triangularView<Eigen::Lower>();
  // tr(Sq^{-1} Sp) = ||Lq^{-1} Lp||_F^2
  const double trace_term = tq.solve(lp).squaredNorm();
  const double maha = tq.solve(q.mean() - p.mean()).squaredNorm();
  const double kl = 0.5 * (trace_term + maha - static_cast<double>(p.dim()) +
                           log_det_from_factor(lq) - log_det_from_factor(lp));
  return std::max(0.0, kl);
}

}  // namespace kinv
