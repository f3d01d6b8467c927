#include "kinv/inversion.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <optional>
#include <string>
#include <thread>

#include "kinv/errors.hpp"
#include "kinv/unscented.hpp"

namespace kinv {
namespace {

Matrix sigma_nu(const InverseProblem& problem, const InversionPolicy& policy) {
  return policy.nu_factor * problem.sigma_eta;
}

double optimization_error(const InverseProblem& problem, const InversionPolicy& policy,
                          const Vector& y_hat) {
  const Matrix lower = cholesky_factor(sigma_nu(problem, policy));
  const Vector whitened = lower.triangularView<Eigen::Lower>().solve(problem.y - y_hat);
  return 0.5 * whitened.squaredNorm();
}

IterationRecord make_record(int iteration, GaussianBelief belief, double opt_error,
                            int evaluations) {
  const double fro = belief.covariance().norm();
  return IterationRecord{iteration, std::move(belief), opt_error, fro, evaluations};
}

std::string describe(const std::exception_ptr& eptr) {
  try {
    std::rethrow_exception(eptr);
  } catch (const std::exception& e) {
    return e.what();
  } catch (...) {
    return "unknown exception";
  }
}

}  // namespace

void InverseProblem::validate() const {
  if (!forward) throw Error(ErrorKind::ConfigError, "inverse problem has no forward map");
  if (y.size() == 0) throw Error(ErrorKind::InvalidDimension, "empty observation vector");
  if (!y.allFinite()) throw Error(ErrorKind::DomainError, "observation has non-finite entries");
  if (sigma_eta.rows() != y.size() || sigma_eta.cols() != y.size()) {
    throw Error(ErrorKind::DimensionMismatch,
                "sigma_eta must be " + std::to_string(y.size()) + "x" +
                    std::to_string(y.size()));
  }
  if (!is_spd(sigma_eta)) {
    throw Error(ErrorKind::NonPositiveDefinite, "sigma_eta is not SPD");
  }
}

void InversionPolicy::validate() const {
  if (!(nu_factor > 0.0)) {
    throw Error(ErrorKind::ConfigError, "nu_factor must be > 0");
  }
  if (max_iterations < 1) {
    throw Error(ErrorKind::ConfigError, "max_iterations must be >= 1");
  }
  if (!(divergence_threshold > 0.0)) {
    throw Error(ErrorKind::ConfigError, "divergence_threshold must be > 0");
  }
  if (!is_spd(initial.covariance())) {
    throw Error(ErrorKind::NonPositiveDefinite, "initial covariance is not SPD");
  }
}

std::vector<Vector> evaluate_points(const ForwardMap& forward,
                                    std::span<const Vector> points,
                                    Eigen::Index expected_size, bool parallel) {
  const std::size_t n = points.size();
  std::vector<Vector> images(n);
  std::vector<std::exception_ptr> failures(n);

  auto evaluate = [&](std::size_t j) {
    try {
      images[j] = forward(points[j]);
    } catch (...) {
      failures[j] = std::current_exception();
    }
  };

  const unsigned workers =
      parallel ? std::min<unsigned>(std::max(1u, std::thread::hardware_concurrency()),
                                    static_cast<unsigned>(n))
               : 1u;
  if (workers <= 1) {
    for (std::size_t j = 0; j < n; ++j) evaluate(j);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t j = next++; j < n; j = next++) evaluate(j);
      });
    }
  }

  for (std::size_t j = 0; j < n; ++j) {
    if (failures[j]) throw ForwardModelFailure(j, describe(failures[j]));
    if (images[j].size() != expected_size) {
      throw ForwardModelFailure(j, "returned " + std::to_string(images[j].size()) +
                                       " values, expected " +
                                       std::to_string(expected_size));
    }
    if (!images[j].allFinite()) throw ForwardModelFailure(j, "non-finite output");
  }
  return images;
}

GaussianBelief predict(const GaussianBelief& belief, const InversionPolicy& policy) {
  const Matrix& omega = policy.omega_policy == OmegaPolicy::Adaptive
                            ? belief.covariance()
                            : policy.initial.covariance();
  if (omega.rows() != belief.dim()) {
    throw Error(ErrorKind::DimensionMismatch, "evolution covariance dimension");
  }
  return GaussianBelief(belief.mean(), belief.covariance() + omega);
}

IterationRecord uki_step(const GaussianBelief& belief, const InverseProblem& problem,
                         const InversionPolicy& policy, int iteration) {
  const GaussianBelief predicted = predict(belief, policy);
  const SigmaEnsemble ensemble = generate_sigma_points(predicted);
  const std::vector<Vector> images = evaluate_points(
      problem.forward, ensemble.points, problem.n_y(), policy.parallel_evaluations);
  TransformEstimate est = transform_estimate(ensemble, images);

  JointGaussian joint{predicted.mean(), est.mean, predicted.covariance(),
                      std::move(est.cross_covariance),
                      est.covariance + sigma_nu(problem, policy)};
  GaussianBelief updated = condition_gaussian(joint, problem.y);
  const double err = optimization_error(problem, policy, joint.mean_y);
  return make_record(iteration, std::move(updated), err,
                     static_cast<int>(ensemble.size()));
}

IterationRecord exki_step(const GaussianBelief& belief, const InverseProblem& problem,
                          const InversionPolicy& policy, int iteration) {
  if (!problem.has_jacobian()) {
    throw Error(ErrorKind::JacobianUnavailable, "ExKI requires an analytic Jacobian");
  }
  const GaussianBelief predicted = predict(belief, policy);
  const std::vector<Vector> image = evaluate_points(
      problem.forward, std::span(&predicted.mean(), 1), problem.n_y(), false);
  const Matrix jac = problem.jacobian(predicted.mean());
  if (jac.rows() != problem.n_y() || jac.cols() != predicted.dim()) {
    throw Error(ErrorKind::DimensionMismatch, "Jacobian has wrong shape");
  }
  if (!jac.allFinite()) throw ForwardModelFailure(0, "non-finite Jacobian");

  const Matrix& c_hat = predicted.covariance();
  JointGaussian joint{predicted.mean(), image.front(), c_hat, c_hat * jac.transpose(),
                      jac * c_hat * jac.transpose() + sigma_nu(problem, policy)};
  GaussianBelief updated = condition_gaussian(joint, problem.y);
  const double err = optimization_error(problem, policy, joint.mean_y);
  return make_record(iteration, std::move(updated), err, 1);
}

InversionResult run_inversion(const InverseProblem& problem, const InversionPolicy& policy) {
  problem.validate();
  policy.validate();
  if (policy.algorithm == Algorithm::Exki && !problem.has_jacobian()) {
    throw Error(ErrorKind::JacobianUnavailable, "ExKI requires an analytic Jacobian");
  }

  InversionResult result;
  result.records.reserve(static_cast<std::size_t>(policy.max_iterations) + 1);
  try {
    const auto y0 = evaluate_points(problem.forward, std::span(&policy.initial.mean(), 1),
                                    problem.n_y(), false);
    result.records.push_back(
        make_record(0, policy.initial, optimization_error(problem, policy, y0.front()), 1));
  } catch (const Error& e) {
    throw e.with_context("iteration 0");
  }

  for (int n = 1; n <= policy.max_iterations; ++n) {
    const GaussianBelief& current = result.records.back().belief;
    try {
      result.records.push_back(policy.algorithm == Algorithm::Uki
                                   ? uki_step(current, problem, policy, n)
                                   : exki_step(current, problem, policy, n));
    } catch (const Error& e) {
      throw e.with_context("iteration " + std::to_string(n));
    }
    const IterationRecord& rec = result.records.back();
    if (!(rec.belief.mean().norm() <= policy.divergence_threshold) ||
        !(rec.cov_frobenius <= policy.divergence_threshold)) {
      result.status = RunStatus::Diverged;
      break;
    }
  }
  return result;
}

StationarityResiduals check_stationarity(const GaussianBelief& belief,
                                         const InverseProblem& problem) {
  if (!problem.has_jacobian()) {
    throw Error(ErrorKind::JacobianUnavailable, "stationarity check needs a Jacobian");
  }
  const Vector& m = belief.mean();
  const Vector g = problem.forward(m);
  const Matrix jac = problem.jacobian(m);
  if (g.size() != problem.n_y() || jac.rows() != problem.n_y() || jac.cols() != m.size()) {
    throw Error(ErrorKind::DimensionMismatch, "forward/Jacobian shape mismatch");
  }

  const Matrix l_eta = cholesky_factor(problem.sigma_eta);
  const Matrix whitened_jac = l_eta.triangularView<Eigen::Lower>().solve(jac);
  const Matrix fisher = whitened_jac.transpose() * whitened_jac;

  const Matrix l_c = cholesky_factor(belief.covariance());
  const Matrix identity = Matrix::Identity(m.size(), m.size());
  const Matrix l_inv = l_c.triangularView<Eigen::Lower>().solve(identity);
  const Matrix precision = l_inv.transpose() * l_inv;

  StationarityResiduals res;
  res.mean_residual = (problem.y - g).norm();
  const double denom = fisher.norm();
  const double gap = (precision - fisher).norm();
  res.precision_residual = denom > 0.0 ? gap / denom : gap;
  return res;
}

}  // namespace kinv
