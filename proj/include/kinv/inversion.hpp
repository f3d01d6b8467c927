#pragma once

#include <functional>
#include <span>
#include <vector>

#include "kinv/gaussian.hpp"

namespace kinv {

using ForwardMap = std::function<Vector(const Vector&)>;
using JacobianMap = std::function<Matrix(const Vector&)>;

/// y = G(theta) + eta, eta ~ N(0, sigma_eta). Forward maps must be
/// re-entrant: sigma points may be evaluated concurrently.
struct InverseProblem {
  ForwardMap forward;
  JacobianMap jacobian;  // empty when no analytic Jacobian exists
  Vector y;
  Matrix sigma_eta;

  Eigen::Index n_y() const noexcept { return y.size(); }
  bool has_jacobian() const noexcept { return static_cast<bool>(jacobian); }
  void validate() const;
};

enum class Algorithm { Uki, Exki };
enum class OmegaPolicy {
  Adaptive,  // Sigma_omega = C_n, so the prediction doubles the covariance
  Fixed,     // Sigma_omega = C_0
};

struct InversionPolicy {
  GaussianBelief initial;
  Algorithm algorithm = Algorithm::Uki;
  OmegaPolicy omega_policy = OmegaPolicy::Adaptive;
  double nu_factor = 2.0;  // Sigma_nu = nu_factor * Sigma_eta
  int max_iterations = 20;
  double divergence_threshold = 1e8;
  bool parallel_evaluations = false;

  void validate() const;
};

struct IterationRecord {
  int iteration = 0;
  GaussianBelief belief;
  double optimization_error = 0.0;  // 0.5 |Sigma_nu^{-1/2} (y - y_hat)|^2
  double cov_frobenius = 0.0;
  int forward_evaluations = 0;
};

enum class RunStatus { Completed, Diverged };

struct InversionResult {
  std::vector<IterationRecord> records;  // records[0] is the initial belief
  RunStatus status = RunStatus::Completed;

  const GaussianBelief& final_belief() const { return records.back().belief; }
};

GaussianBelief predict(const GaussianBelief& belief, const InversionPolicy& policy);

/// One unscented step: predict, sigma points, 2n+1 forward evaluations,
/// transform estimate, add Sigma_nu, condition on y. Any failing evaluation
/// aborts the step with ForwardModelFailure.
IterationRecord uki_step(const GaussianBelief& belief, const InverseProblem& problem,
                         const InversionPolicy& policy, int iteration = 1);

/// One extended step using the analytic Jacobian at the predicted mean.
IterationRecord exki_step(const GaussianBelief& belief, const InverseProblem& problem,
                          const InversionPolicy& policy, int iteration = 1);

/// Runs the fixed iteration budget without early stopping. Stops with
/// RunStatus::Diverged once the mean norm or the covariance Frobenius norm
/// exceeds the policy's divergence threshold; the partial history is kept.
InversionResult run_inversion(const InverseProblem& problem, const InversionPolicy& policy);

struct StationarityResiduals {
  double mean_residual = 0.0;       // |y - G(m)|
  double precision_residual = 0.0;  // |C^{-1} - J^T S^{-1} J|_F / |J^T S^{-1} J|_F
};

/// Distance of a belief from the fixed point m = G^{-1}(y),
/// C^{-1} = dG(m)^T Sigma_eta^{-1} dG(m).
StationarityResiduals check_stationarity(const GaussianBelief& belief,
                                         const InverseProblem& problem);

/// Evaluates `forward` on every point. Failures and non-finite outputs are
/// reported as ForwardModelFailure carrying the lowest failing index,
/// independent of how many threads were used.
std::vector<Vector> evaluate_points(const ForwardMap& forward,
                                    std::span<const Vector> points,
                                    Eigen::Index expected_size, bool parallel);

}  // namespace kinv
