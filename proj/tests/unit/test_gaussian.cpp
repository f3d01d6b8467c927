#include <doctest.h>

#include <cmath>

#include "kinv/errors.hpp"
#include "kinv/gaussian.hpp"
#include "test_support.hpp"

using namespace kinv;
using kinv::testing::Rng;
using kinv::testing::rel_fro;

namespace {

Matrix m2(double a, double b, double c, double d) {
  Matrix m(2, 2);
  m << a, b, c, d;
  return m;
}

// Conditioning through the inverse of the full joint covariance:
// p(theta | y) has precision P_tt and mean m_t - P_tt^{-1} P_ty (y - m_y).
GaussianBelief brute_force_condition(const JointGaussian& j, const Vector& y) {
  const auto nt = j.mean_theta.size();
  const auto ny = j.mean_y.size();
  Matrix full(nt + ny, nt + ny);
  full << j.cov_theta, j.cov_theta_y, j.cov_theta_y.transpose(), j.cov_y;
  const Matrix precision = full.inverse();
  const Matrix p_tt = precision.topLeftCorner(nt, nt);
  const Matrix p_ty = precision.topRightCorner(nt, ny);
  const Matrix cov = p_tt.inverse();
  const Vector mean = j.mean_theta - cov * p_ty * (y - j.mean_y);
  return GaussianBelief(mean, cov);
}

}  // namespace

TEST_CASE("cholesky_factor on identity and diagonal inputs") {
  CHECK(cholesky_factor(Matrix::Identity(2, 2)).isApprox(Matrix::Identity(2, 2), 0.0));
  const Matrix l = cholesky_factor(m2(4, 0, 0, 9));
  CHECK(l(0, 0) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(l(1, 1) == doctest::Approx(3.0).epsilon(1e-15));
  CHECK(l(0, 1) == 0.0);
  CHECK(l(1, 0) == 0.0);
}

TEST_CASE("cholesky_factor reconstructs [[2,1],[1,2]]") {
  const Matrix c = m2(2, 1, 1, 2);
  const Matrix l = cholesky_factor(c);
  CHECK(l(0, 1) == 0.0);
  CHECK((l * l.transpose() - c).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("cholesky_factor reconstructs random SPD matrices") {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const auto n = rng.integer(1, 8);
    const Matrix c = rng.spd(n, 1e-3);
    const Matrix l = cholesky_factor(c);
    CHECK(rel_fro(l * l.transpose(), c) <= 1e-10);
    CHECK(l.isLowerTriangular());
  }
}

TEST_CASE("cholesky_factor symmetrizes and applies jitter") {
  // Slightly asymmetric input is symmetrized before factoring.
  Matrix c = m2(2, 1 + 1e-14, 1, 2);
  const Matrix l = cholesky_factor(c);
  CHECK(rel_fro(l * l.transpose(), symmetrize(c)) <= 1e-12);

  // Rank-one PSD: the first pivot succeeds, the second is zero and needs jitter.
  const Matrix singular = m2(1, 1, 1, 1);
  const Matrix ls = cholesky_factor(singular);
  CHECK((ls.diagonal().array() > 0).all());
  CHECK(rel_fro(ls * ls.transpose(), singular) <= 1e-7);

  CHECK_THROWS_AS(cholesky_factor(m2(1, 0, 0, -1)), Error);
  try {
    cholesky_factor(m2(1, 0, 0, -1));
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NonPositiveDefinite);
  }
  try {
    cholesky_factor(Matrix::Ones(2, 3));
    FAIL("expected DimensionMismatch");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DimensionMismatch);
  }
  Matrix nan = Matrix::Identity(2, 2);
  nan(0, 0) = std::nan("");
  CHECK_THROWS_AS(cholesky_factor(nan), Error);
}

TEST_CASE("GaussianBelief stores a symmetric covariance") {
  const GaussianBelief b(Vector::Zero(2), m2(2, 1, 1.2, 2));
  CHECK(b.covariance()(0, 1) == b.covariance()(1, 0));
  CHECK(b.covariance()(0, 1) == doctest::Approx(1.1));
  CHECK_THROWS_AS(GaussianBelief(Vector::Zero(3), Matrix::Identity(2, 2)), Error);
  CHECK_THROWS_AS(GaussianBelief(Vector::Zero(0), Matrix::Zero(0, 0)), Error);
}

TEST_CASE("condition_gaussian closed-form cases") {
  SUBCASE("2D joint N(0, [[2,1],[1,2]]) observed at 1") {
    const JointGaussian j{Vector::Zero(1), Vector::Zero(1), Matrix::Constant(1, 1, 2.0),
                          Matrix::Constant(1, 1, 1.0), Matrix::Constant(1, 1, 2.0)};
    const auto post = condition_gaussian(j, Vector::Constant(1, 1.0));
    CHECK(post.mean()(0) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(post.covariance()(0, 0) == doctest::Approx(1.5).epsilon(1e-14));
  }
  SUBCASE("zero cross-covariance leaves the prior block unchanged") {
    const Matrix c = m2(3, 0.5, 0.5, 1);
    const JointGaussian j{Vector{{1.0, -2.0}}, Vector::Zero(3), c, Matrix::Zero(2, 3),
                          Matrix::Identity(3, 3)};
    const auto post = condition_gaussian(j, Vector{{5.0, 6.0, 7.0}});
    CHECK(post.mean() == Vector{{1.0, -2.0}});
    CHECK(post.covariance() == c);
  }
  SUBCASE("scalar linear step of the adaptive iteration") {
    // Prior N(0, 1), doubled to 2 by the prediction; Sigma_nu = 2 * 0.01.
    const JointGaussian j{Vector::Zero(1), Vector::Zero(1), Matrix::Constant(1, 1, 2.0),
                          Matrix::Constant(1, 1, 2.0), Matrix::Constant(1, 1, 2.02)};
    const auto post = condition_gaussian(j, Vector::Constant(1, 1.0));
    CHECK(post.mean()(0) == doctest::Approx(2.0 / 2.02).epsilon(1e-14));
    CHECK(post.mean()(0) == doctest::Approx(0.990099).epsilon(1e-6));
    CHECK(post.covariance()(0, 0) == doctest::Approx(0.019802).epsilon(1e-5));
    // Precision recursion C1^{-1} = 0.5 G^T Sigma_eta^{-1} G + (2 C0)^{-1}.
    CHECK(post.covariance()(0, 0) == doctest::Approx(1.0 / (0.5 / 0.01 + 0.5)).epsilon(1e-12));
  }
}

TEST_CASE("condition_gaussian matches full-matrix inversion on random joints") {
  Rng rng(2024);
  for (int trial = 0; trial < 300; ++trial) {
    const auto total = rng.integer(2, 5);
    const auto nt = rng.integer(1, total - 1);
    const auto ny = total - nt;
    const Matrix full = rng.spd(total, 0.3);
    JointGaussian j{rng.vector(nt), rng.vector(ny), full.topLeftCorner(nt, nt),
                    full.topRightCorner(nt, ny), full.bottomRightCorner(ny, ny)};
    const Vector y = rng.vector(ny);
    const auto fast = condition_gaussian(j, y);
    const auto slow = brute_force_condition(j, y);
    CHECK((fast.mean() - slow.mean()).norm() <= 1e-9);
    CHECK((fast.covariance() - slow.covariance()).norm() <= 1e-9);
    CHECK(fast.covariance() == fast.covariance().transpose());
  }
}

TEST_CASE("condition_gaussian errors") {
  JointGaussian j{Vector::Zero(1), Vector::Zero(1), Matrix::Identity(1, 1),
                  Matrix::Identity(1, 1), Matrix::Constant(1, 1, -1.0)};
  try {
    condition_gaussian(j, Vector::Zero(1));
    FAIL("expected NonPositiveDefinite");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NonPositiveDefinite);
  }
  j.cov_y = Matrix::Identity(1, 1);
  try {
    condition_gaussian(j, Vector::Zero(2));
    FAIL("expected DimensionMismatch");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DimensionMismatch);
  }
}

TEST_CASE("gaussian_kl closed forms") {
  const GaussianBelief std2(Vector::Zero(2), Matrix::Identity(2, 2));
  CHECK(gaussian_kl(std2, std2) == doctest::Approx(0.0));
  const GaussianBelief a(Vector::Zero(1), Matrix::Identity(1, 1));
  const GaussianBelief b(Vector::Ones(1), Matrix::Identity(1, 1));
  CHECK(gaussian_kl(a, b) == doctest::Approx(0.5).epsilon(1e-14));
  const GaussianBelief wide(Vector::Zero(1), Matrix::Constant(1, 1, 2.0));
  CHECK(gaussian_kl(wide, a) == doctest::Approx(0.5 * (2.0 - 1.0 - std::log(2.0))).epsilon(1e-14));
  CHECK(gaussian_kl(wide, a) == doctest::Approx(0.153426).epsilon(1e-6));

  try {
    gaussian_kl(std2, a);
    FAIL("expected DimensionMismatch");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DimensionMismatch);
  }
  const GaussianBelief bad(Vector::Zero(1), Matrix::Constant(1, 1, -1.0));
  CHECK_THROWS_AS(gaussian_kl(bad, a), Error);
}

TEST_CASE("gaussian_kl is nonnegative and vanishes on identical inputs") {
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const auto n = rng.integer(1, 6);
    const GaussianBelief p(rng.vector(n), rng.spd(n));
    const GaussianBelief q(rng.vector(n), rng.spd(n));
    CHECK(gaussian_kl(p, q) >= 0.0);
    CHECK(gaussian_kl(p, p) <= 1e-12);
  }
}
