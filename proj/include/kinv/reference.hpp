#pragma once

#include <cstdint>
#include <functional>
#include <optional>

#include "kinv/gaussian.hpp"
#include "kinv/inversion.hpp"

namespace kinv {

struct McmcConfig {
  double step_size = 1.0;  // proposal std per coordinate
  std::int64_t n_samples = 100000;
  std::int64_t burn_in = 0;
  std::uint64_t seed = 0;
  Vector init;
  int n_batches = 50;  // batch-means standard errors

  void validate() const;
};

/// Posterior moments from one of the oracles. Standard errors are batch-means
/// estimates for RWM, iid estimates for pull-back sampling and zero for
/// quadrature.
struct MomentSummary {
  Vector mean;
  Matrix covariance;
  std::int64_t count = 0;  // effective samples (RWM), accepted draws, or nodes
  Vector mean_stderr;
  Vector std_stderr;
  double acceptance_rate = 0.0;  // RWM only
  std::int64_t rejected = 0;     // pull-back draws outside the inverse's domain

  Vector std_dev() const { return covariance.diagonal().cwiseSqrt(); }
};

/// Unnormalised log posterior -Phi(theta) + log prior(theta), with
/// Phi = 0.5 |Sigma_eta^{-1/2} (y - G(theta))|^2. Forward failures map to
/// -infinity. `prior` empty means a flat prior.
class LogPosterior {
 public:
  LogPosterior(const InverseProblem& problem, std::optional<GaussianBelief> prior);

  double operator()(const Vector& theta) const;
  double misfit(const Vector& theta) const;  // Phi, +inf on forward failure

 private:
  const InverseProblem* problem_;
  Matrix noise_factor_;
  std::optional<GaussianBelief> prior_;
  Matrix prior_factor_;
};

/// min(1, exp(log_proposed - log_current)).
double acceptance_probability(double log_current, double log_proposed);

/// Random-walk Metropolis with an isotropic Gaussian proposal. Moments use
/// the samples after burn-in. Deterministic for a given seed.
MomentSummary rwm_sample(const InverseProblem& problem,
                         const std::optional<GaussianBelief>& prior,
                         const McmcConfig& config);

using InverseMap = std::function<std::optional<Vector>(const Vector&)>;

/// Moments of theta = G^{-1}(y - eta), eta ~ N(0, Sigma_eta). Draws that fall
/// outside the inverse's domain are rejected; more than half rejected throws
/// DomainExhausted. A zero Sigma_eta gives the degenerate point G^{-1}(y).
MomentSummary pullback_moments(const InverseProblem& problem, const InverseMap& inverse,
                               std::int64_t n_samples, std::uint64_t seed);

/// Mean and variance of a one-parameter posterior by composite Simpson on
/// [lo, hi] with n_nodes (odd, >= 1001). Throws TruncationSuspect when the
/// density at either end exceeds 1e-12 of the peak.
MomentSummary posterior_moments_quadrature(const InverseProblem& problem,
                                           const std::optional<GaussianBelief>& prior,
                                           double lo, double hi, int n_nodes);

}  // namespace kinv
