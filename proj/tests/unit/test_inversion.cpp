#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "kinv/errors.hpp"
#include "kinv/forward_models.hpp"
#include "kinv/inversion.hpp"
#include "kinv/reference.hpp"
#include "test_support.hpp"

using namespace kinv;
using kinv::testing::min_eigenvalue;
using kinv::testing::rel_fro;
using kinv::testing::Rng;

namespace {

InversionPolicy make_policy(const Vector& m0, const Matrix& c0, int iterations = 20,
                            Algorithm algorithm = Algorithm::Uki) {
  InversionPolicy policy{GaussianBelief(m0, c0)};
  policy.algorithm = algorithm;
  policy.max_iterations = iterations;
  return policy;
}

InverseProblem scalar_problem(ScalarProblemKind kind, double y, double s = 0.01) {
  return make_inverse_problem(make_scalar_model(kind), Vector::Constant(1, y),
                              Matrix::Constant(1, 1, s));
}

struct LinearCase {
  Matrix g;
  InverseProblem problem;
  Vector m0;
  Matrix c0;
};

LinearCase random_linear_case(Rng& rng) {
  const int nt = rng.integer(1, 5);
  const int ny = rng.integer(nt, 5);
  LinearCase lc;
  lc.g = rng.full_column_rank(ny, nt);
  lc.problem = make_inverse_problem(make_linear_model(lc.g), rng.vector(ny), rng.spd(ny, 0.5));
  lc.m0 = rng.vector(nt);
  lc.c0 = rng.spd(nt, 0.5);
  return lc;
}

}  // namespace

TEST_CASE("predict") {
  const GaussianBelief b(Vector{{3.0, -1.0}}, Vector{{1.0, 4.0}}.asDiagonal());
  auto policy = make_policy(Vector::Zero(2), Matrix::Identity(2, 2));
  const auto adaptive = predict(b, policy);
  CHECK(adaptive.covariance().isApprox(Matrix(Vector{{2.0, 8.0}}.asDiagonal()), 0.0));
  CHECK(adaptive.mean() == b.mean());
  policy.omega_policy = OmegaPolicy::Fixed;
  const auto fixed = predict(b, policy);
  CHECK(fixed.covariance() == Matrix(Vector{{2.0, 5.0}}.asDiagonal()));
  CHECK(fixed.mean() == b.mean());
}

TEST_CASE("uki_step on the scalar identity map") {
  Matrix g = Matrix::Identity(1, 1);
  const auto problem =
      make_inverse_problem(make_linear_model(g), Vector::Constant(1, 1.0), Matrix::Constant(1, 1, 0.01));
  const auto policy = make_policy(Vector::Zero(1), Matrix::Identity(1, 1));
  const auto rec = uki_step(policy.initial, problem, policy);
  // C_hat = 2, C_pp = 2 + 0.02: mean 2/2.02, covariance 2 - 4/2.02.
  CHECK(rec.belief.mean()(0) == doctest::Approx(2.0 / 2.02).epsilon(1e-14));
  CHECK(rec.belief.covariance()(0, 0) == doctest::Approx(2.0 - 4.0 / 2.02).epsilon(1e-12));
  CHECK(rec.belief.mean()(0) == doctest::Approx(0.990099).epsilon(1e-6));
  CHECK(rec.belief.covariance()(0, 0) == doctest::Approx(0.019802).epsilon(1e-5));
  CHECK(rec.forward_evaluations == 3);
  CHECK(rec.cov_frobenius == doctest::Approx(rec.belief.covariance().norm()));
  // 0.5 * (1 - 0)^2 / 0.02
  CHECK(rec.optimization_error == doctest::Approx(25.0));
}

TEST_CASE("iterated precision matches the linear closed form") {
  Rng rng(31);
  for (int trial = 0; trial < 30; ++trial) {
    const auto lc = random_linear_case(rng);
    const auto policy = make_policy(lc.m0, lc.c0, 20);
    const auto result = run_inversion(lc.problem, policy);
    REQUIRE(result.records.size() == 21);
    const Matrix a = lc.g.transpose() * lc.problem.sigma_eta.inverse() * lc.g;
    const Matrix c0_inv = lc.c0.inverse();
    for (int n = 0; n <= 20; ++n) {
      const double f = std::ldexp(1.0, -n);
      const Matrix expected = (1.0 - f) * a + f * c0_inv;
      const Matrix got = result.records[n].belief.covariance().inverse();
      CHECK(rel_fro(got, expected) <= 1e-9);
      // Distance to the limit shrinks by exactly 2^-n on the prior term.
      CHECK(rel_fro(got - a, f * (c0_inv - a)) <= 1e-7);
    }
  }
}

TEST_CASE("linear mean limit is the unregularized least-squares minimizer") {
  Rng rng(37);
  for (int trial = 0; trial < 20; ++trial) {
    const auto lc = random_linear_case(rng);
    const auto result = run_inversion(lc.problem, make_policy(lc.m0, lc.c0, 60));
    const Vector m = result.final_belief().mean();
    const Matrix s_nu = 2.0 * lc.problem.sigma_eta;
    const Vector grad = lc.g.transpose() * s_nu.llt().solve(lc.problem.y - lc.g * m);
    CHECK(grad.norm() <= 1e-8);
  }
}

TEST_CASE("UKI and ExKI agree on linear problems") {
  Rng rng(41);
  for (int trial = 0; trial < 20; ++trial) {
    const auto lc = random_linear_case(rng);
    const auto uki = run_inversion(lc.problem, make_policy(lc.m0, lc.c0, 20, Algorithm::Uki));
    const auto exki = run_inversion(lc.problem, make_policy(lc.m0, lc.c0, 20, Algorithm::Exki));
    for (std::size_t n = 0; n < uki.records.size(); ++n) {
      const auto& bu = uki.records[n].belief;
      const auto& be = exki.records[n].belief;
      CHECK((bu.mean() - be.mean()).norm() <= 1e-9 * (1.0 + be.mean().norm()));
      CHECK((bu.covariance() - be.covariance()).norm() <= 1e-9 * be.covariance().norm());
    }
    CHECK(exki.records[1].forward_evaluations == 1);
    CHECK(uki.records[1].forward_evaluations == 2 * static_cast<int>(lc.m0.size()) + 1);
  }
}

TEST_CASE("constant forward map carries no information") {
  InverseProblem problem;
  problem.forward = [](const Vector&) { return Vector{{1.0, 2.0}}; };
  problem.jacobian = [](const Vector&) { return Matrix::Zero(2, 2); };
  problem.y = Vector{{0.5, 0.5}};
  problem.sigma_eta = Matrix::Identity(2, 2);
  const Matrix c0 = Matrix{{1.0, 0.2}, {0.2, 3.0}};
  const auto policy = make_policy(Vector{{0.3, -0.7}}, c0);
  const auto uki = uki_step(policy.initial, problem, policy);
  CHECK(uki.belief.mean() == policy.initial.mean());
  CHECK((uki.belief.covariance() - 2.0 * c0).norm() <= 1e-14);
  const auto exki = exki_step(policy.initial, problem, policy);
  CHECK(exki.belief.mean() == policy.initial.mean());
  CHECK((exki.belief.covariance() - 2.0 * c0).norm() <= 1e-14);
}

TEST_CASE("exki_step uses the analytic derivative") {
  const auto problem = scalar_problem(ScalarProblemKind::Exponential, std::exp(0.2));
  CHECK(problem.jacobian(Vector::Constant(1, 2.0))(0, 0) == doctest::Approx(0.122140).epsilon(1e-5));
  const auto policy = make_policy(Vector::Constant(1, 2.0), Matrix::Constant(1, 1, 0.25));
  const auto rec = exki_step(policy.initial, problem, policy);
  const double d = std::exp(0.2) / 10.0;
  const double c_hat = 0.5;
  const double c_new = c_hat - c_hat * d * d * c_hat / (d * c_hat * d + 0.02);
  CHECK(rec.belief.mean()(0) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(rec.belief.covariance()(0, 0) == doctest::Approx(c_new).epsilon(1e-12));
}

TEST_CASE("exki_step without a Jacobian") {
  auto problem = make_inverse_problem(make_darcy_model(), Vector::Zero(63),
                                      Matrix::Identity(63, 63));
  const auto policy = make_policy(Vector::Zero(32), Matrix::Identity(32, 32), 1, Algorithm::Exki);
  try {
    exki_step(policy.initial, problem, policy);
    FAIL("expected JacobianUnavailable");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::JacobianUnavailable);
  }
  CHECK_THROWS_AS(run_inversion(problem, policy), Error);
  CHECK_THROWS_AS(check_stationarity(policy.initial, problem), Error);
}

TEST_CASE("forward failures abort the step and name the point") {
  InverseProblem problem;
  problem.forward = [](const Vector& t) {
    Vector out = t;
    if (t(1) < -0.5) out(0) = std::nan("");
    return out;
  };
  problem.y = Vector::Zero(2);
  problem.sigma_eta = Matrix::Identity(2, 2);
  for (bool parallel : {false, true}) {
    auto policy = make_policy(Vector::Zero(2), Matrix::Identity(2, 2));
    policy.parallel_evaluations = parallel;
    try {
      uki_step(policy.initial, problem, policy);
      FAIL("expected ForwardModelFailure");
    } catch (const ForwardModelFailure& e) {
      // Points: centre, +e1, +e2, -e1, -e2.
      CHECK(e.point_index() == 4);
    }
    try {
      run_inversion(problem, policy);
      FAIL("expected ForwardModelFailure");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::ForwardModelFailure);
      CHECK(std::string(e.what()).find("iteration 1") != std::string::npos);
    }
  }

  std::vector<Vector> points;
  for (int i = 0; i < 50; ++i) points.push_back(Vector::Constant(1, i));
  const ForwardMap bad = [](const Vector& t) {
    if (t(0) == 17 || t(0) == 40) throw std::runtime_error("solver blew up");
    return t;
  };
  for (bool parallel : {false, true}) {
    try {
      evaluate_points(bad, points, 1, parallel);
      FAIL("expected ForwardModelFailure");
    } catch (const ForwardModelFailure& e) {
      CHECK(e.point_index() == 17);
    }
  }
  CHECK_THROWS_AS(evaluate_points([](const Vector&) { return Vector::Zero(2); }, points, 1, false),
                  ForwardModelFailure);
}

TEST_CASE("exponential problem converges to the stationary belief") {
  const auto problem = scalar_problem(ScalarProblemKind::Exponential, std::exp(0.2));
  const auto result = run_inversion(problem, make_policy(Vector::Constant(1, 1.0),
                                                         Matrix::Constant(1, 1, 0.25)));
  REQUIRE(result.status == RunStatus::Completed);
  REQUIRE(result.records.size() == 21);
  const double d = std::exp(0.2) / 10.0;
  const double std_star = std::sqrt(0.01 / (d * d));
  CHECK(std::abs(result.final_belief().mean()(0) - 2.0) <= 1e-2);
  CHECK(std::abs(std::sqrt(result.final_belief().covariance()(0, 0)) / std_star - 1.0) <= 0.05);
  CHECK(std_star == doctest::Approx(0.8187).epsilon(1e-4));
  CHECK(result.records[0].forward_evaluations == 1);
  for (std::size_t n = 1; n < result.records.size(); ++n) {
    CHECK(result.records[n].iteration == static_cast<int>(n));
    CHECK(result.records[n].forward_evaluations == 3);
  }
}

TEST_CASE("two-parameter elliptic problem") {
  const auto model = make_elliptic2_model();
  const auto problem =
      make_inverse_problem(model, Vector{{27.5, 79.7}}, 0.01 * Matrix::Identity(2, 2));
  // Closed form: 0.5 theta_2 = 52.2 and (3/32) exp(-theta_1) = 1.4.
  const Vector exact{{std::log(3.0 / 32.0 / 1.4), 104.4}};
  const Matrix c0 = Vector{{1.0, 100.0}}.asDiagonal();
  const auto result = run_inversion(problem, make_policy(Vector::Zero(2), c0, 15));
  const Vector m = result.final_belief().mean();
  CHECK(std::abs(m(0) / exact(0) - 1.0) <= 5e-3);
  CHECK(std::abs(m(1) / exact(1) - 1.0) <= 5e-3);
  CHECK(exact(0) == doctest::Approx(-2.7037).epsilon(1e-4));

  const auto exki = run_inversion(problem, make_policy(Vector::Zero(2), c0, 30, Algorithm::Exki));
  const auto res = check_stationarity(exki.final_belief(), problem);
  CHECK(res.precision_residual < 1e-2);
  CHECK(res.mean_residual < 1e-6);
}

TEST_CASE("Darcy problem recovers the reference field") {
  const auto theta_vals = read_vector_file(KINV_FIXTURE_DIR "/darcy_theta_ref.txt");
  const auto y_vals = read_vector_file(KINV_FIXTURE_DIR "/darcy_y_ref.txt");
  const Vector theta_ref = Eigen::Map<const Vector>(theta_vals.data(), 32);
  const Vector y = Eigen::Map<const Vector>(y_vals.data(), 63);
  const auto problem = make_inverse_problem(make_darcy_model(), y, Matrix::Identity(63, 63));
  auto policy = make_policy(Vector::Zero(32), Matrix::Identity(32, 32), 20);
  policy.parallel_evaluations = true;
  const auto par = run_inversion(problem, policy);
  const Vector m = par.final_belief().mean();
  CHECK((m - theta_ref).norm() / theta_ref.norm() <= 2e-2);
  CHECK(par.records[1].forward_evaluations == 65);

  policy.parallel_evaluations = false;
  const auto seq = run_inversion(problem, policy);
  for (std::size_t n = 0; n < seq.records.size(); ++n) {
    CHECK(seq.records[n].belief.mean() == par.records[n].belief.mean());
    CHECK(seq.records[n].belief.covariance() == par.records[n].belief.covariance());
  }
}

TEST_CASE("stationarity residuals") {
  const auto problem = scalar_problem(ScalarProblemKind::Exponential, std::exp(0.2));
  const double d = std::exp(0.2) / 10.0;
  const GaussianBelief exact(Vector::Constant(1, 2.0), Matrix::Constant(1, 1, 0.01 / (d * d)));
  const auto r = check_stationarity(exact, problem);
  CHECK(r.mean_residual < 1e-8);
  CHECK(r.precision_residual < 1e-8);
  CHECK(exact.covariance()(0, 0) == doctest::Approx(0.67032).epsilon(1e-5));

  const GaussianBelief off(Vector::Constant(1, 0.0), Matrix::Constant(1, 1, 3.0));
  const auto r2 = check_stationarity(off, problem);
  CHECK(r2.mean_residual > 0.1);
  CHECK(r2.precision_residual > 0.1);
}

TEST_CASE("wrong-branch hyperbola diverges and keeps its history") {
  const auto problem = scalar_problem(ScalarProblemKind::Hyperbola, 0.5);
  const auto result = run_inversion(
      problem, make_policy(Vector::Constant(1, -1.0), Matrix::Constant(1, 1, 0.25), 100));
  CHECK(result.status == RunStatus::Diverged);
  CHECK(result.records.size() < 101);
  const auto& last = result.records.back();
  CHECK((last.belief.mean().norm() > 1e8 || last.cov_frobenius > 1e8));
  for (std::size_t n = 0; n + 1 < result.records.size(); ++n) {
    CHECK(result.records[n].cov_frobenius <= 1e8);
    CHECK(result.records[n].belief.mean()(0) < 0.0);
  }
}

TEST_CASE("every recorded covariance is SPD") {
  Rng rng(53);
  const std::vector<std::pair<ScalarProblemKind, double>> cases = {
      {ScalarProblemKind::Exponential, std::exp(0.2)},
      {ScalarProblemKind::Quadratic, 4.0},
      {ScalarProblemKind::Cubic, 8.0},
      {ScalarProblemKind::SignCubic, 9.0},
      {ScalarProblemKind::Hyperbola, 0.5},
  };
  for (const auto& [kind, y] : cases) {
    for (int seed = 0; seed < 5; ++seed) {
      const double m0 = kind == ScalarProblemKind::Hyperbola ? rng.uniform(0.5, 3) : rng.uniform(-3, 3);
      auto policy = make_policy(Vector::Constant(1, m0), Matrix::Constant(1, 1, rng.uniform(0.01, 1)));
      if (rng.uniform(0, 1) < 0.5) policy.omega_policy = OmegaPolicy::Fixed;
      const auto result = run_inversion(scalar_problem(kind, y), policy);
      for (const auto& rec : result.records) CHECK(is_spd(rec.belief.covariance()));
    }
  }
  for (int trial = 0; trial < 10; ++trial) {
    const auto lc = random_linear_case(rng);
    const auto result = run_inversion(lc.problem, make_policy(lc.m0, lc.c0));
    for (const auto& rec : result.records) CHECK(is_spd(rec.belief.covariance()));
  }
}

TEST_CASE("covariance stays below 2^n C_0 for rank-deficient G") {
  Rng rng(59);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix g = rng.matrix(2, 3);  // nontrivial null space
    const auto problem = make_inverse_problem(make_linear_model(g), rng.vector(2), rng.spd(2, 0.5));
    const Matrix c0 = rng.spd(3, 0.5);
    const auto result = run_inversion(problem, make_policy(rng.vector(3), c0, 20));
    for (std::size_t n = 0; n < result.records.size(); ++n) {
      const Matrix bound = std::ldexp(1.0, static_cast<int>(n)) * c0;
      const Matrix gap = bound - result.records[n].belief.covariance();
      CHECK(min_eigenvalue(gap) >= -1e-9 * bound.norm());
    }
    // Null-space directions keep growing.
    CHECK(result.final_belief().covariance().norm() > 1e4);
  }
}

TEST_CASE("adaptive evolution error tracks the posterior better than fixed") {
  const auto problem = make_inverse_problem(make_elliptic2_model(), Vector{{27.5, 79.7}},
                                            0.01 * Matrix::Identity(2, 2));
  const Matrix c0 = Vector{{1.0, 100.0}}.asDiagonal();
  auto policy = make_policy(Vector::Zero(2), c0, 15);
  const auto adaptive = run_inversion(problem, policy);
  policy.omega_policy = OmegaPolicy::Fixed;
  const auto fixed = run_inversion(problem, policy);

  McmcConfig cfg;
  cfg.step_size = 1.0;
  cfg.n_samples = 400000;
  cfg.burn_in = 100000;
  cfg.seed = 3;
  cfg.init = adaptive.final_belief().mean();
  const auto oracle = rwm_sample(problem, GaussianBelief(Vector::Zero(2), c0), cfg);
  const double gap_adaptive = (adaptive.final_belief().covariance() - oracle.covariance).norm();
  const double gap_fixed = (fixed.final_belief().covariance() - oracle.covariance).norm();
  CHECK(gap_adaptive < gap_fixed);
}

TEST_CASE("policy and problem validation") {
  auto policy = make_policy(Vector::Zero(1), Matrix::Identity(1, 1));
  policy.nu_factor = 0.0;
  CHECK_THROWS_AS(policy.validate(), Error);
  policy.nu_factor = 2.0;
  policy.max_iterations = 0;
  CHECK_THROWS_AS(policy.validate(), Error);

  auto problem = scalar_problem(ScalarProblemKind::Cubic, 8.0);
  problem.sigma_eta = Matrix::Constant(1, 1, -1.0);
  CHECK_THROWS_AS(problem.validate(), Error);
  problem = scalar_problem(ScalarProblemKind::Cubic, 8.0);
  policy = make_policy(Vector::Zero(2), Matrix::Identity(2, 2));
  CHECK_THROWS_AS(uki_step(policy.initial, problem, policy), Error);
}
