#include "kinv/forward_models.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include "kinv/errors.hpp"
#include "kinv/numeric_io.hpp"

namespace kinv {
namespace {

constexpr double kEllipticCoefficient = 3.0 / 32.0;  // x/2 - x^2/2 at 0.25 and 0.75

double sign(double v) { return static_cast<double>((0.0 < v) - (v < 0.0)); }

void require_size(const Vector& theta, Eigen::Index n, const char* what) {
  if (theta.size() != n) {
    throw Error(ErrorKind::DimensionMismatch, std::string(what) + " expects " +
                                                  std::to_string(n) + " parameters, got " +
                                                  std::to_string(theta.size()));
  }
}

Vector scalar_vector(double v) {
  Vector out(1);
  out(0) = v;
  return out;
}

}  // namespace

double scalar_forward(ScalarProblemKind kind, double theta) {
  switch (kind) {
    case ScalarProblemKind::Exponential: return std::exp(theta / 10.0);
    case ScalarProblemKind::Quadratic: return theta * theta;
    case ScalarProblemKind::Cubic: return theta * theta * theta;
    case ScalarProblemKind::SignCubic: return sign(theta) + theta * theta * theta;
    case ScalarProblemKind::Hyperbola:
      if (theta == 0.0) throw Error(ErrorKind::DomainError, "1/theta undefined at theta = 0");
      return 1.0 / theta;
  }
  throw Error(ErrorKind::DomainError, "unknown scalar problem");
}

double scalar_jacobian(ScalarProblemKind kind, double theta) {
  switch (kind) {
    case ScalarProblemKind::Exponential: return std::exp(theta / 10.0) / 10.0;
    case ScalarProblemKind::Quadratic: return 2.0 * theta;
    case ScalarProblemKind::Cubic:
    case ScalarProblemKind::SignCubic: return 3.0 * theta * theta;
    case ScalarProblemKind::Hyperbola:
      if (theta == 0.0) throw Error(ErrorKind::DomainError, "1/theta undefined at theta = 0");
      return -1.0 / (theta * theta);
  }
  throw Error(ErrorKind::DomainError, "unknown scalar problem");
}

Vector elliptic2_forward(const Vector& theta) {
  require_size(theta, 2, "elliptic2_forward");
  const double bump = kEllipticCoefficient * std::exp(-theta(0));
  Vector p(2);
  p << kEllipticX1 * theta(1) + bump, kEllipticX2 * theta(1) + bump;
  return p;
}

Matrix elliptic2_jacobian(const Vector& theta) {
  require_size(theta, 2, "elliptic2_jacobian");
  const double dbump = -kEllipticCoefficient * std::exp(-theta(0));
  Matrix j(2, 2);
  j << dbump, kEllipticX1, dbump, kEllipticX2;
  return j;
}

// ---------------------------------------------------------------------------

void DarcyConfig::validate() const {
  if (cells < 2) throw Error(ErrorKind::ConfigError, "darcy.cells must be >= 2");
  if (n_kl < 1) throw Error(ErrorKind::ConfigError, "darcy.n_kl must be >= 1");
  if (n_obs < 1) throw Error(ErrorKind::ConfigError, "darcy.n_obs must be >= 1");
  if (cells % (n_obs + 1) != 0) {
    throw Error(ErrorKind::ConfigError,
                "darcy.cells must be a multiple of n_obs + 1 so observations fall on faces");
  }
  if (!(tau > 0.0) || !(d > 0.0)) {
    throw Error(ErrorKind::ConfigError, "darcy.tau and darcy.d must be > 0");
  }
}

double kl_eigenvalue(int l, double tau, double d) {
  const double pl = std::numbers::pi * static_cast<double>(l);
  return std::pow(pl * pl + tau * tau, -d);
}

double kl_log_permeability(std::span<const double> theta, double x, double tau, double d) {
  double sum = 0.0;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const int l = static_cast<int>(i) + 1;
    sum += theta[i] * std::sqrt(kl_eigenvalue(l, tau, d)) * std::numbers::sqrt2 *
           std::cos(std::numbers::pi * l * x);
  }
  return sum;
}

std::vector<double> solve_tridiagonal(std::span<const double> lower,
                                      std::span<const double> diag,
                                      std::span<const double> upper,
                                      std::span<const double> rhs) {
  const std::size_t n = diag.size();
  if (lower.size() != n || upper.size() != n || rhs.size() != n || n == 0) {
    throw Error(ErrorKind::DimensionMismatch, "tridiagonal bands differ in length");
  }
  std::vector<double> c(n), x(n);
  double pivot = diag[0];
  if (!(std::isfinite(pivot) && pivot != 0.0)) {
    throw Error(ErrorKind::SolverFailure, "singular tridiagonal pivot at row 0");
  }
  c[0] = upper[0] / pivot;
  x[0] = rhs[0] / pivot;
  for (std::size_t i = 1; i < n; ++i) {
    pivot = diag[i] - lower[i] * c[i - 1];
    if (!(std::isfinite(pivot) && pivot != 0.0)) {
      throw Error(ErrorKind::SolverFailure,
                  "singular tridiagonal pivot at row " + std::to_string(i));
    }
    c[i] = upper[i] / pivot;
    x[i] = (rhs[i] - lower[i] * x[i - 1]) / pivot;
  }
  for (std::size_t i = n - 1; i-- > 0;) x[i] -= c[i] * x[i + 1];
  return x;
}

DarcySolution darcy_pressure(const Vector& theta, const DarcyConfig& config) {
  config.validate();
  require_size(theta, config.n_kl, "darcy_solve");
  if (!theta.allFinite()) throw Error(ErrorKind::SolverFailure, "non-finite parameters");

  const auto n = static_cast<std::size_t>(config.cells);
  const double h = 1.0 / static_cast<double>(n);
  const double inv_h2 = 1.0 / (h * h);
  const std::span<const double> coeffs(theta.data(), static_cast<std::size_t>(theta.size()));

  // Face permeability evaluated pointwise from the continuous field.
  std::vector<double> a_face(n + 1);
  for (std::size_t i = 0; i <= n; ++i) {
    a_face[i] = std::exp(
        kl_log_permeability(coeffs, static_cast<double>(i) * h, config.tau, config.d));
  }

  DarcySolution sol;
  sol.centers.resize(n);
  std::vector<double> lower(n, 0.0), diag(n), upper(n, 0.0), rhs(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double xc = (static_cast<double>(i) + 0.5) * h;
    sol.centers[i] = xc;
    // Boundary cells see the Dirichlet value half a cell away.
    const double west = a_face[i] * inv_h2 * (i == 0 ? 2.0 : 1.0);
    const double east = a_face[i + 1] * inv_h2 * (i + 1 == n ? 2.0 : 1.0);
    diag[i] = west + east;
    if (i > 0) lower[i] = -west;
    if (i + 1 < n) upper[i] = -east;
    rhs[i] = xc <= 0.5 ? config.source_left : config.source_right;
  }
  sol.cell_pressure = solve_tridiagonal(lower, diag, upper, rhs);

  sol.face_pressure.assign(n + 1, 0.0);
  for (std::size_t i = 1; i < n; ++i) {
    sol.face_pressure[i] = 0.5 * (sol.cell_pressure[i - 1] + sol.cell_pressure[i]);
  }
  return sol;
}

Vector darcy_solve(const Vector& theta, const DarcyConfig& config) {
  const DarcySolution sol = darcy_pressure(theta, config);
  const int stride = config.cells / (config.n_obs + 1);
  Vector obs(config.n_obs);
  for (int k = 1; k <= config.n_obs; ++k) {
    obs(k - 1) = sol.face_pressure[static_cast<std::size_t>(k * stride)];
  }
  return obs;
}

// ---------------------------------------------------------------------------

namespace {

struct ProblemInfo {
  ProblemId id;
  std::string_view name;
  std::string_view description;
};

constexpr std::array<ProblemInfo, 8> kProblems{{
    {ProblemId::Exponential, "exponential", "G(theta) = exp(theta/10), 1 parameter"},
    {ProblemId::Quadratic, "quadratic", "G(theta) = theta^2, 1 parameter, bimodal posterior"},
    {ProblemId::Cubic, "cubic", "G(theta) = theta^3, 1 parameter"},
    {ProblemId::SignCubic, "sign-cubic", "G(theta) = sign(theta) + theta^3, 1 parameter"},
    {ProblemId::Hyperbola, "hyperbola", "G(theta) = 1/theta, 1 parameter"},
    {ProblemId::EllipticTwoParam, "elliptic2",
     "1D elliptic BVP observed at x = 0.25, 0.75, 2 parameters"},
    {ProblemId::Darcy, "darcy",
     "1D Darcy flow, KL log-permeability, 63 pressure observations"},
    {ProblemId::Linear, "linear", "G(theta) = G theta with a user-supplied matrix"},
}};

constexpr std::array<ProblemId, 8> kProblemIds{
    ProblemId::Exponential, ProblemId::Quadratic,        ProblemId::Cubic,
    ProblemId::SignCubic,   ProblemId::Hyperbola,        ProblemId::EllipticTwoParam,
    ProblemId::Darcy,       ProblemId::Linear};

const ProblemInfo& info(ProblemId id) {
  for (const auto& p : kProblems) {
    if (p.id == id) return p;
  }
  throw Error(ErrorKind::ConfigError, "unknown problem id");
}

ProblemId scalar_problem_id(ScalarProblemKind kind) {
  switch (kind) {
    case ScalarProblemKind::Exponential: return ProblemId::Exponential;
    case ScalarProblemKind::Quadratic: return ProblemId::Quadratic;
    case ScalarProblemKind::Cubic: return ProblemId::Cubic;
    case ScalarProblemKind::SignCubic: return ProblemId::SignCubic;
    case ScalarProblemKind::Hyperbola: return ProblemId::Hyperbola;
  }
  throw Error(ErrorKind::ConfigError, "unknown scalar problem");
}

std::optional<double> scalar_inverse(ScalarProblemKind kind, double z) {
  switch (kind) {
    case ScalarProblemKind::Exponential:
      if (z > 0.0) return 10.0 * std::log(z);
      return std::nullopt;
    case ScalarProblemKind::Cubic: return std::cbrt(z);
    case ScalarProblemKind::SignCubic:
      // The range is (-inf, -1) U {0} U (1, inf).
      if (z > 1.0) return std::cbrt(z - 1.0);
      if (z < -1.0) return std::cbrt(z + 1.0);
      if (z == 0.0) return 0.0;
      return std::nullopt;
    case ScalarProblemKind::Hyperbola:
      if (z != 0.0) return 1.0 / z;
      return std::nullopt;
    case ScalarProblemKind::Quadratic: return std::nullopt;
  }
  return std::nullopt;
}

}  // namespace

std::string_view to_string(ProblemId id) { return info(id).name; }

std::string_view describe(ProblemId id) { return info(id).description; }

std::optional<ProblemId> parse_problem_id(std::string_view name) {
  for (const auto& p : kProblems) {
    if (p.name == name) return p.id;
  }
  return std::nullopt;
}

std::span<const ProblemId> all_problem_ids() { return kProblemIds; }

ForwardModel make_scalar_model(ScalarProblemKind kind) {
  ForwardModel model;
  model.id = scalar_problem_id(kind);
  model.n_theta = 1;
  model.n_y = 1;
  model.forward = [kind](const Vector& theta) {
    require_size(theta, 1, "scalar forward");
    return scalar_vector(scalar_forward(kind, theta(0)));
  };
  model.jacobian = [kind](const Vector& theta) {
    require_size(theta, 1, "scalar jacobian");
    Matrix j(1, 1);
    j(0, 0) = scalar_jacobian(kind, theta(0));
    return j;
  };
  if (kind != ScalarProblemKind::Quadratic) {
    model.inverse = [kind](const Vector& z) -> std::optional<Vector> {
      require_size(z, 1, "scalar inverse");
      const auto t = scalar_inverse(kind, z(0));
      if (!t) return std::nullopt;
      return scalar_vector(*t);
    };
  }
  return model;
}

ForwardModel make_elliptic2_model() {
  ForwardModel model;
  model.id = ProblemId::EllipticTwoParam;
  model.n_theta = 2;
  model.n_y = 2;
  model.forward = elliptic2_forward;
  model.jacobian = elliptic2_jacobian;
  model.inverse = [](const Vector& z) -> std::optional<Vector> {
    require_size(z, 2, "elliptic2 inverse");
    const double theta2 = (z(1) - z(0)) / (kEllipticX2 - kEllipticX1);
    const double bump = z(0) - kEllipticX1 * theta2;
    if (!(bump > 0.0)) return std::nullopt;
    Vector t(2);
    t << -std::log(bump / kEllipticCoefficient), theta2;
    return t;
  };
  return model;
}

ForwardModel make_darcy_model(const DarcyConfig& config) {
  config.validate();
  ForwardModel model;
  model.id = ProblemId::Darcy;
  model.n_theta = config.n_kl;
  model.n_y = config.n_obs;
  model.forward = [config](const Vector& theta) { return darcy_solve(theta, config); };
  return model;
}

ForwardModel make_linear_model(const Matrix& g) {
  if (g.rows() == 0 || g.cols() == 0) {
    throw Error(ErrorKind::InvalidDimension, "linear model needs a non-empty matrix");
  }
  ForwardModel model;
  model.id = ProblemId::Linear;
  model.n_theta = static_cast<int>(g.cols());
  model.n_y = static_cast<int>(g.rows());
  model.forward = [g](const Vector& theta) -> Vector {
    require_size(theta, g.cols(), "linear forward");
    return g * theta;
  };
  model.jacobian = [g](const Vector&) -> Matrix { return g; };
  if (g.rows() == g.cols()) {
    Eigen::ColPivHouseholderQR<Matrix> qr(g);
    if (qr.rank() == g.cols()) {
      model.inverse = [qr](const Vector& z) -> std::optional<Vector> {
        return Vector(qr.solve(z));
      };
    }
  }
  return model;
}

Vector make_reference_observation(const ForwardModel& model, const Vector& theta_ref,
                                  const Matrix& sigma_eta, std::uint64_t seed,
                                  NoiseKind noise) {
  require_size(theta_ref, model.n_theta, "reference parameter");
  Vector y = model.forward(theta_ref);
  if (noise == NoiseKind::Gaussian) {
    const Matrix lower = cholesky_factor(sigma_eta);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector z(y.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = normal(rng);
    y += lower * z;
  }
  return y;
}

InverseProblem make_inverse_problem(const ForwardModel& model, Vector y, Matrix sigma_eta) {
  if (y.size() != model.n_y) {
    throw Error(ErrorKind::DimensionMismatch,
                "observation has " + std::to_string(y.size()) + " entries, model produces " +
                    std::to_string(model.n_y));
  }
  InverseProblem problem{model.forward, model.jacobian, std::move(y), std::move(sigma_eta)};
  problem.validate();
  return problem;
}

std::vector<double> read_vector_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path);
  std::vector<double> values;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (line.front() == '#') continue;
    values.push_back(parse_double(line));
  }
  return values;
}

void write_vector_file(const std::string& path, std::span<const double> values) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path);
  for (double v : values) out << format_double(v) << '\n';
}

}  // namespace kinv
