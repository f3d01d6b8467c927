#include "kinv/reference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "kinv/errors.hpp"

namespace kinv {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Streaming moments with fixed batch assignment for batch-means errors.
// Values are shifted by the first sample before accumulation.
class MomentAccumulator {
 public:
  MomentAccumulator(Eigen::Index dim, std::int64_t expected, int n_batches)
      : dim_(dim),
        expected_(std::max<std::int64_t>(expected, 1)),
        n_batches_(std::max(1, n_batches)),
        sum_(Vector::Zero(dim)),
        outer_(Matrix::Zero(dim, dim)),
        batch_sum_(Matrix::Zero(dim, n_batches_)),
        batch_sq_(Matrix::Zero(dim, n_batches_)),
        batch_count_(static_cast<std::size_t>(n_batches_), 0) {}

  // `slot` is the position of the draw in [0, expected), which fixes its batch.
  void add(const Vector& x, std::int64_t slot) {
    if (count_ == 0) shift_ = x;
    const Vector d = x - shift_;
    sum_ += d;
    outer_.noalias() += d * d.transpose();
    const auto b = static_cast<Eigen::Index>(std::min<std::int64_t>(
        slot * n_batches_ / expected_, n_batches_ - 1));
    batch_sum_.col(b) += d;
    batch_sq_.col(b) += d.cwiseProduct(d);
    ++batch_count_[static_cast<std::size_t>(b)];
    ++count_;
  }

  std::int64_t count() const { return count_; }

  MomentSummary summarize(bool effective_count) const {
    MomentSummary s;
    if (count_ == 0) {
      throw Error(ErrorKind::DomainExhausted, "no samples accumulated");
    }
    const double n = static_cast<double>(count_);
    const Vector dmean = sum_ / n;
    s.mean = shift_ + dmean;
    s.covariance = symmetrize(outer_ / n - dmean * dmean.transpose());
    // Round-off can leave tiny negative diagonals for degenerate samples.
    s.covariance.diagonal() = s.covariance.diagonal().cwiseMax(0.0);

    s.mean_stderr = Vector::Zero(dim_);
    s.std_stderr = Vector::Zero(dim_);
    std::vector<Eigen::Index> used;
    for (Eigen::Index b = 0; b < n_batches_; ++b) {
      if (batch_count_[static_cast<std::size_t>(b)] > 0) used.push_back(b);
    }
    const auto nb = static_cast<double>(used.size());
    double min_ess = n;
    if (used.size() >= 2) {
      for (Eigen::Index i = 0; i < dim_; ++i) {
        const double m = dmean(i);
        double sm = 0.0, sm2 = 0.0, sq = 0.0, sq2 = 0.0;
        for (auto b : used) {
          const double cnt = static_cast<double>(batch_count_[static_cast<std::size_t>(b)]);
          const double mu_b = batch_sum_(i, b) / cnt;
          // Mean of (x - mean)^2 within the batch.
          const double q_b = batch_sq_(i, b) / cnt - 2.0 * m * mu_b + m * m;
          sm += mu_b;
          sm2 += mu_b * mu_b;
          sq += q_b;
          sq2 += q_b * q_b;
        }
        const double var_mu = std::max(0.0, (sm2 - sm * sm / nb) / (nb - 1.0));
        const double var_q = std::max(0.0, (sq2 - sq * sq / nb) / (nb - 1.0));
        s.mean_stderr(i) = std::sqrt(var_mu / nb);
        const double sd = std::sqrt(s.covariance(i, i));
        s.std_stderr(i) = sd > 0.0 ? std::sqrt(var_q / nb) / (2.0 * sd) : 0.0;
        if (s.mean_stderr(i) > 0.0) {
          min_ess = std::min(min_ess, s.covariance(i, i) / (s.mean_stderr(i) * s.mean_stderr(i)));
        }
      }
    }
    s.count = effective_count ? static_cast<std::int64_t>(std::floor(std::min(min_ess, n)))
                              : count_;
    return s;
  }

 private:
  Eigen::Index dim_;
  std::int64_t expected_;
  int n_batches_;
  std::int64_t count_ = 0;
  Vector shift_;
  Vector sum_;
  Matrix outer_;
  Matrix batch_sum_;
  Matrix batch_sq_;
  std::vector<std::int64_t> batch_count_;
};

bool is_zero_matrix(const Matrix& m) { return m.cwiseAbs().maxCoeff() == 0.0; }

}  // namespace

void McmcConfig::validate() const {
  if (!(step_size > 0.0)) throw Error(ErrorKind::ConfigError, "mcmc step_size must be > 0");
  if (n_samples < 1) throw Error(ErrorKind::ConfigError, "mcmc n_samples must be >= 1");
  if (burn_in < 0 || burn_in >= n_samples) {
    throw Error(ErrorKind::ConfigError, "mcmc burn_in must satisfy 0 <= burn_in < n_samples");
  }
  if (n_batches < 2) throw Error(ErrorKind::ConfigError, "mcmc n_batches must be >= 2");
  if (init.size() == 0) throw Error(ErrorKind::ConfigError, "mcmc init is empty");
}

LogPosterior::LogPosterior(const InverseProblem& problem, std::optional<GaussianBelief> prior)
    : problem_(&problem),
      noise_factor_(cholesky_factor(problem.sigma_eta)),
      prior_(std::move(prior)) {
  if (prior_) prior_factor_ = cholesky_factor(prior_->covariance());
}

double LogPosterior::misfit(const Vector& theta) const {
  Vector g;
  try {
    g = problem_->forward(theta);
  } catch (const std::exception&) {
    return std::numeric_limits<double>::infinity();
  }
  if (g.size() != problem_->n_y() || !g.allFinite()) {
    return std::numeric_limits<double>::infinity();
  }
  const Vector r = noise_factor_.triangularView<Eigen::Lower>().solve(problem_->y - g);
  return 0.5 * r.squaredNorm();
}

double LogPosterior::operator()(const Vector& theta) const {
  const double phi = misfit(theta);
  if (!std::isfinite(phi)) return kNegInf;
  double log_prior = 0.0;
  if (prior_) {
    if (theta.size() != prior_->dim()) {
      throw Error(ErrorKind::DimensionMismatch, "prior dimension");
    }
    const Vector r =
        prior_factor_.triangularView<Eigen::Lower>().solve(theta - prior_->mean());
    log_prior = -0.5 * r.squaredNorm();
  }
  return -phi + log_prior;
}

double acceptance_probability(double log_current, double log_proposed) {
  if (log_proposed == kNegInf) return 0.0;
  const double diff = log_proposed - log_current;
  if (diff >= 0.0) return 1.0;
  return std::exp(diff);
}

MomentSummary rwm_sample(const InverseProblem& problem,
                         const std::optional<GaussianBelief>& prior,
                         const McmcConfig& config) {
  config.validate();
  const LogPosterior log_density(problem, prior);
  const Eigen::Index dim = config.init.size();

  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  Vector current = config.init;
  double log_current = log_density(current);
  if (log_current == kNegInf) {
    throw Error(ErrorKind::DomainError, "mcmc init has zero posterior density");
  }

  const std::int64_t kept = config.n_samples - config.burn_in;
  MomentAccumulator acc(dim, kept, config.n_batches);
  std::int64_t accepted = 0;
  Vector proposal(dim);
  for (std::int64_t k = 0; k < config.n_samples; ++k) {
    for (Eigen::Index i = 0; i < dim; ++i) {
      proposal(i) = current(i) + config.step_size * normal(rng);
    }
    const double log_proposed = log_density(proposal);
    const double u = uniform(rng);
    if (u < acceptance_probability(log_current, log_proposed)) {
      current = proposal;
      log_current = log_proposed;
      ++accepted;
    }
    if (k >= config.burn_in) acc.add(current, k - config.burn_in);
  }
  MomentSummary s = acc.summarize(/*effective_count=*/true);
  s.acceptance_rate = static_cast<double>(accepted) / static_cast<double>(config.n_samples);
  return s;
}

MomentSummary pullback_moments(const InverseProblem& problem, const InverseMap& inverse,
                               std::int64_t n_samples, std::uint64_t seed) {
  if (!inverse) throw Error(ErrorKind::ConfigError, "pull-back needs an inverse map");
  if (n_samples < 2) throw Error(ErrorKind::ConfigError, "pull-back n_samples must be >= 2");
  const Eigen::Index ny = problem.n_y();
  const bool degenerate = is_zero_matrix(problem.sigma_eta);
  const Matrix lower = degenerate ? Matrix::Zero(ny, ny) : cholesky_factor(problem.sigma_eta);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::optional<MomentAccumulator> acc;
  std::int64_t rejected = 0;
  Vector z(ny);
  for (std::int64_t k = 0; k < n_samples; ++k) {
    for (Eigen::Index i = 0; i < ny; ++i) z(i) = normal(rng);
    const Vector target = problem.y - lower * z;
    std::optional<Vector> theta = inverse(target);
    if (!theta || !theta->allFinite()) {
      ++rejected;
      continue;
    }
    if (!acc) acc.emplace(theta->size(), n_samples, 50);
    acc->add(*theta, k);
  }
  if (!acc || 2 * rejected > n_samples) {
    throw Error(ErrorKind::DomainExhausted,
                std::to_string(rejected) + " of " + std::to_string(n_samples) +
                    " pull-back draws left the inverse map's domain");
  }
  MomentSummary s = acc->summarize(/*effective_count=*/false);
  s.rejected = rejected;
  return s;
}

MomentSummary posterior_moments_quadrature(const InverseProblem& problem,
                                           const std::optional<GaussianBelief>& prior,
                                           double lo, double hi, int n_nodes) {
  if (n_nodes < 1001 || n_nodes % 2 == 0) {
    throw Error(ErrorKind::InvalidDimension, "n_nodes must be odd and >= 1001");
  }
  if (!(lo < hi)) throw Error(ErrorKind::ConfigError, "quadrature needs lo < hi");
  if (prior && prior->dim() != 1) {
    throw Error(ErrorKind::DimensionMismatch, "quadrature prior must be one-dimensional");
  }
  const LogPosterior log_density(problem, prior);
  const auto n = static_cast<std::size_t>(n_nodes);
  const double h = (hi - lo) / static_cast<double>(n - 1);

  std::vector<double> nodes(n), logp(n);
  Vector theta(1);
  double peak = kNegInf;
  for (std::size_t i = 0; i < n; ++i) {
    nodes[i] = i + 1 == n ? hi : lo + static_cast<double>(i) * h;
    theta(0) = nodes[i];
    logp[i] = log_density(theta);
    peak = std::max(peak, logp[i]);
  }
  if (peak == kNegInf) throw Error(ErrorKind::DomainError, "posterior density vanishes");

  const double tail = std::max(std::exp(logp.front() - peak), std::exp(logp.back() - peak));
  if (tail >= 1e-12) {
    throw Error(ErrorKind::TruncationSuspect,
                "endpoint density is " + std::to_string(tail) + " of the peak on [" +
                    std::to_string(lo) + ", " + std::to_string(hi) + "]");
  }

  auto simpson_weight = [n](std::size_t i) {
    if (i == 0 || i + 1 == n) return 1.0;
    return i % 2 == 1 ? 4.0 : 2.0;
  };
  double z = 0.0, first = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = simpson_weight(i) * std::exp(logp[i] - peak);
    z += w;
    first += w * nodes[i];
  }
  const double mean = first / z;
  double second = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = nodes[i] - mean;
    second += simpson_weight(i) * std::exp(logp[i] - peak) * d * d;
  }

  MomentSummary s;
  s.mean = Vector::Constant(1, mean);
  s.covariance = Matrix::Constant(1, 1, second / z);
  s.count = n_nodes;
  s.mean_stderr = Vector::Zero(1);
  s.std_stderr = Vector::Zero(1);
  return s;
}

}  // namespace kinv
