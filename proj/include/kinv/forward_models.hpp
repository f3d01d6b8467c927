#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kinv/gaussian.hpp"
#include "kinv/inversion.hpp"

namespace kinv {

// ---------------------------------------------------------------------------
// Scalar benchmark maps

enum class ScalarProblemKind {
  Exponential,  // exp(theta / 10)
  Quadratic,    // theta^2
  Cubic,        // theta^3
  SignCubic,    // sign(theta) + theta^3
  Hyperbola,    // 1 / theta
};

double scalar_forward(ScalarProblemKind kind, double theta);

/// Analytic derivative. SignCubic returns the derivative of the smooth part,
/// 3 theta^2; the jump of sign() at 0 is ignored. Hyperbola throws
/// DomainError at 0.
double scalar_jacobian(ScalarProblemKind kind, double theta);

// ---------------------------------------------------------------------------
// Two-parameter elliptic problem
//
// -(exp(theta_1) p')' = 1 on [0, 1], p(0) = 0, p(1) = theta_2, observed at
// x = 0.25 and x = 0.75. The closed-form solution is
// p(x) = theta_2 x + exp(-theta_1) (x/2 - x^2/2).

inline constexpr double kEllipticX1 = 0.25;
inline constexpr double kEllipticX2 = 0.75;

Vector elliptic2_forward(const Vector& theta);
Matrix elliptic2_jacobian(const Vector& theta);

// ---------------------------------------------------------------------------
// 1D Darcy flow with a KL log-permeability field

struct DarcyConfig {
  int cells = 512;
  int n_kl = 32;
  double tau = 3.0;
  double d = 1.0;
  double source_left = 1000.0;   // f on [0, 1/2]
  double source_right = 2000.0;  // f on (1/2, 1]
  int n_obs = 63;                // observed at x_k = k / (n_obs + 1)

  void validate() const;
};

/// lambda_l = (pi^2 l^2 + tau^2)^(-d), l >= 1.
double kl_eigenvalue(int l, double tau = 3.0, double d = 1.0);

/// log a(x) = sum_l theta_l sqrt(lambda_l) sqrt(2) cos(pi l x), l = 1..theta.size().
double kl_log_permeability(std::span<const double> theta, double x, double tau = 3.0,
                           double d = 1.0);

/// Pressure on the cell-centred grid together with the face values, so that
/// faces.front() and faces.back() are the Dirichlet boundary values.
struct DarcySolution {
  std::vector<double> centers;  // x of each cell centre
  std::vector<double> cell_pressure;
  std::vector<double> face_pressure;  // cells + 1 values, faces at i * h
};

DarcySolution darcy_pressure(const Vector& theta, const DarcyConfig& config = {});

/// Pressure at the n_obs equidistant interior points.
Vector darcy_solve(const Vector& theta, const DarcyConfig& config = {});

/// Thomas algorithm for a tridiagonal system. `lower[0]` and `upper[n-1]`
/// are ignored. Throws SolverFailure on a zero or non-finite pivot.
std::vector<double> solve_tridiagonal(std::span<const double> lower,
                                      std::span<const double> diag,
                                      std::span<const double> upper,
                                      std::span<const double> rhs);

// ---------------------------------------------------------------------------
// Problem registry

enum class ProblemId {
  Exponential,
  Quadratic,
  Cubic,
  SignCubic,
  Hyperbola,
  EllipticTwoParam,
  Darcy,
  Linear,
};

std::string_view to_string(ProblemId id);
std::optional<ProblemId> parse_problem_id(std::string_view name);
std::span<const ProblemId> all_problem_ids();
std::string_view describe(ProblemId id);

/// A forward map plus its analytic Jacobian (when available) and, for
/// bijective maps, the analytic inverse used by the pull-back sampler.
struct ForwardModel {
  ProblemId id = ProblemId::Linear;
  int n_theta = 0;
  int n_y = 0;
  ForwardMap forward;
  JacobianMap jacobian;
  std::function<std::optional<Vector>(const Vector&)> inverse;
};

ForwardModel make_scalar_model(ScalarProblemKind kind);
ForwardModel make_elliptic2_model();
ForwardModel make_darcy_model(const DarcyConfig& config = {});
/// G(theta) = g * theta. The inverse is provided when g is square.
ForwardModel make_linear_model(const Matrix& g);

enum class NoiseKind { None, Gaussian };

/// y = G(theta_ref), optionally plus one N(0, sigma_eta) draw from `seed`.
Vector make_reference_observation(const ForwardModel& model, const Vector& theta_ref,
                                  const Matrix& sigma_eta, std::uint64_t seed,
                                  NoiseKind noise);

InverseProblem make_inverse_problem(const ForwardModel& model, Vector y, Matrix sigma_eta);

// ---------------------------------------------------------------------------
// Plain-text vector files: one full-precision decimal per line.

std::vector<double> read_vector_file(const std::string& path);
void write_vector_file(const std::string& path, std::span<const double> values);

}  // namespace kinv
