#include "kinv/runner.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "kinv/errors.hpp"
#include "kinv/forward_models.hpp"
#include "kinv/history.hpp"

namespace kinv {
namespace {

using nlohmann::json;

std::string_view algorithm_name(Algorithm a) { return a == Algorithm::Uki ? "uki" : "exki"; }

std::string_view omega_name(OmegaPolicy p) {
  return p == OmegaPolicy::Adaptive ? "adaptive" : "fixed";
}

std::string_view oracle_name(OracleType t) {
  switch (t) {
    case OracleType::Mcmc: return "mcmc";
    case OracleType::Pullback: return "pullback";
    case OracleType::Quadrature: return "quadrature";
  }
  return "unknown";
}

MomentSummary run_oracle(const RunConfig& cfg) {
  const OracleConfig& oc = *cfg.oracle;
  // Offset so the oracle stream differs from the observation-noise stream.
  const std::uint64_t seed = cfg.seed + 1;
  switch (oc.type) {
    case OracleType::Mcmc: {
      McmcConfig mc;
      mc.step_size = oc.step_size;
      mc.n_samples = oc.n_samples;
      mc.burn_in = oc.burn_in;
      mc.seed = seed;
      mc.init = oc.init;
      return rwm_sample(cfg.inverse_problem, oc.prior, mc);
    }
    case OracleType::Pullback:
      return pullback_moments(cfg.inverse_problem, cfg.model.inverse, oc.n_samples, seed);
    case OracleType::Quadrature:
      return posterior_moments_quadrature(cfg.inverse_problem, oc.prior, oc.lo, oc.hi,
                                          oc.n_nodes);
  }
  throw Error(ErrorKind::ConfigError, "unknown oracle type");
}

json oracle_block(const RunConfig& cfg, const GaussianBelief& final,
                  const MomentSummary& oracle) {
  json block;
  block["type"] = oracle_name(cfg.oracle->type);
  block["mean"] = to_json(oracle.mean);
  block["covariance"] = to_json(oracle.covariance);
  block["count"] = oracle.count;
  block["mean_stderr"] = to_json(oracle.mean_stderr);
  block["std_stderr"] = to_json(oracle.std_stderr);
  if (cfg.oracle->type == OracleType::Mcmc) block["acceptance_rate"] = oracle.acceptance_rate;
  if (cfg.oracle->type == OracleType::Pullback) block["rejected"] = oracle.rejected;

  const Vector mean_diff = (final.mean() - oracle.mean).cwiseAbs();
  block["mean_abs_diff"] = to_json(mean_diff);
  block["mean_gap"] = (final.mean() - oracle.mean).norm();

  const Matrix& c = final.covariance();
  json rel = json::array();
  for (Eigen::Index i = 0; i < c.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index k = 0; k < c.cols(); ++k) {
      const double ref = oracle.covariance(i, k);
      if (ref == 0.0) {
        row.push_back(nullptr);
      } else {
        row.push_back(std::abs(c(i, k) - ref) / std::abs(ref));
      }
    }
    rel.push_back(std::move(row));
  }
  block["covariance_rel_diff"] = std::move(rel);
  block["covariance_frobenius_gap"] = (c - oracle.covariance).norm();
  try {
    block["kl_uki_to_oracle"] =
        gaussian_kl(final, GaussianBelief(oracle.mean, oracle.covariance));
  } catch (const Error&) {
    block["kl_uki_to_oracle"] = nullptr;
  }
  return block;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorKind::IoError, "write failed for " + path.string());
}

std::string fmt_vec(const Vector& v) {
  std::ostringstream ss;
  ss << std::setprecision(6) << '[';
  for (Eigen::Index i = 0; i < v.size(); ++i) ss << (i ? ", " : "") << v(i);
  ss << ']';
  return ss.str();
}

struct LoadedSummary {
  std::string label;
  std::string problem;
  GaussianBelief belief;
  json oracle;
};

LoadedSummary load_summary(const std::filesystem::path& path) {
  const json j = read_json_file(path);
  if (!j.contains("problem") || !j.contains("final_mean") || !j.contains("final_covariance")) {
    throw Error(ErrorKind::ConfigError, path.string() + " is not a summary.json");
  }
  Vector mean = vector_from_json(j.at("final_mean"), "final_mean");
  Matrix cov = matrix_from_json(j.at("final_covariance"), mean.size(), "final_covariance");
  return LoadedSummary{path.string(), j.at("problem").get<std::string>(),
                       GaussianBelief(std::move(mean), std::move(cov)),
                       j.value("oracle", json(nullptr))};
}

std::string kl_or_na(const GaussianBelief& p, const GaussianBelief& q) {
  try {
    std::ostringstream ss;
    ss << std::setprecision(6) << gaussian_kl(p, q);
    return ss.str();
  } catch (const Error&) {
    return "n/a";
  }
}

}  // namespace

RunOutcome execute_run(const RunConfig& cfg) {
  RunOutcome outcome;
  outcome.result = run_inversion(cfg.inverse_problem, cfg.policy);
  const GaussianBelief& final = outcome.result.final_belief();

  json s;
  s["problem"] = to_string(cfg.problem);
  s["algorithm"] = algorithm_name(cfg.policy.algorithm);
  s["omega_policy"] = omega_name(cfg.policy.omega_policy);
  s["status"] = outcome.result.status == RunStatus::Completed ? "completed" : "diverged";
  s["iterations"] = outcome.result.records.back().iteration;
  s["final_mean"] = to_json(final.mean());
  s["final_covariance"] = to_json(final.covariance());
  s["final_optimization_error"] = outcome.result.records.back().optimization_error;
  if (cfg.theta_ref) {
    s["theta_ref"] = to_json(*cfg.theta_ref);
    const double ref_norm = cfg.theta_ref->norm();
    s["relative_error_to_theta_ref"] =
        ref_norm > 0.0 ? json((final.mean() - *cfg.theta_ref).norm() / ref_norm) : json(nullptr);
  }
  s["stationarity"] = nullptr;
  if (cfg.inverse_problem.has_jacobian()) {
    try {
      const auto res = check_stationarity(final, cfg.inverse_problem);
      s["stationarity"] = json{{"mean_residual", res.mean_residual},
                               {"precision_residual", res.precision_residual}};
    } catch (const Error&) {
      // Degenerate final belief (e.g. after divergence): leave null.
    }
  }
  if (cfg.oracle) {
    outcome.oracle = run_oracle(cfg);
    s["oracle"] = oracle_block(cfg, final, *outcome.oracle);
  }
  outcome.summary = std::move(s);
  return outcome;
}

void write_run_outputs(const RunConfig& cfg, const RunOutcome& outcome,
                       const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::IoError, "cannot create " + dir.string() + ": " + ec.message());
  std::ostringstream history;
  write_history_csv(history, outcome.result.records);
  write_text(dir / "history.csv", history.str());
  write_text(dir / "summary.json", outcome.summary.dump(2) + "\n");
  write_text(dir / "config_resolved.json", cfg.resolved.dump(2) + "\n");
}

int run_command(const std::filesystem::path& config_path,
                const std::vector<std::string>& overrides,
                const std::optional<std::string>& out_dir,
                const std::optional<std::uint64_t>& seed, std::ostream& out,
                std::ostream& err) {
  try {
    json raw = read_json_file(config_path);
    for (const auto& o : overrides) apply_override(raw, o);
    if (out_dir) raw["output_dir"] = *out_dir;
    if (seed) raw["seed"] = *seed;
    const RunConfig cfg = resolve_run_config(raw, config_path.parent_path());
    const RunOutcome outcome = execute_run(cfg);
    write_run_outputs(cfg, outcome, cfg.output_dir);

    const auto& final = outcome.result.final_belief();
    out << to_string(cfg.problem) << ": " << outcome.summary.at("status").get<std::string>()
        << " after " << outcome.result.records.back().iteration << " iterations, mean "
        << fmt_vec(final.mean()) << "\n";
    out << "wrote " << cfg.output_dir << "/{history.csv,summary.json,config_resolved.json}\n";
    if (outcome.result.status == RunStatus::Diverged) {
      err << "DivergenceDetected: mean or covariance exceeded "
          << cfg.policy.divergence_threshold << " at iteration "
          << outcome.result.records.back().iteration << "\n";
      return kExitDiverged;
    }
    return kExitOk;
  } catch (const Error& e) {
    err << e.what() << "\n";
    return kExitError;
  }
}

int compare_command(const std::vector<std::filesystem::path>& paths, std::ostream& out,
                    std::ostream& err) {
  try {
    if (paths.size() < 2) {
      throw Error(ErrorKind::ConfigError, "compare needs at least two summaries");
    }
    std::vector<LoadedSummary> runs;
    for (const auto& p : paths) runs.push_back(load_summary(p));
    for (const auto& r : runs) {
      if (r.problem != runs.front().problem || r.belief.dim() != runs.front().belief.dim()) {
        throw Error(ErrorKind::MismatchedProblems,
                    r.label + " is '" + r.problem + "', " + runs.front().label + " is '" +
                        runs.front().problem + "'");
      }
    }

    int label_w = 10;
    for (const auto& r : runs) label_w = std::max(label_w, static_cast<int>(r.label.size()) + 2);

    out << "problem: " << runs.front().problem << "\n\n";
    out << std::left << std::setw(label_w) << "summary" << std::setw(34) << "mean" << std::setw(34)
        << "std" << std::setw(18) << "oracle_mean_gap" << "oracle_cov_gap\n";
    for (const auto& r : runs) {
      std::ostringstream gm, gc;
      gm << std::setprecision(6);
      gc << std::setprecision(6);
      if (r.oracle.is_object()) {
        gm << r.oracle.value("mean_gap", std::nan(""));
        gc << r.oracle.value("covariance_frobenius_gap", std::nan(""));
      } else {
        gm << "-";
        gc << "-";
      }
      out << std::setw(label_w) << r.label << std::setw(34) << fmt_vec(r.belief.mean())
          << std::setw(34) << fmt_vec(r.belief.covariance().diagonal().cwiseSqrt())
          << std::setw(18) << gm.str() << gc.str() << "\n";
    }

    out << "\n" << std::setw(label_w) << "a" << std::setw(label_w) << "b" << std::setw(14) << "mean_gap"
        << std::setw(16) << "cov_fro_gap" << std::setw(14) << "kl(a||b)" << "kl(b||a)\n";
    for (std::size_t i = 0; i < runs.size(); ++i) {
      for (std::size_t k = i + 1; k < runs.size(); ++k) {
        const auto& a = runs[i].belief;
        const auto& b = runs[k].belief;
        std::ostringstream mg, cg;
        mg << std::setprecision(6) << (a.mean() - b.mean()).norm();
        cg << std::setprecision(6) << (a.covariance() - b.covariance()).norm();
        out << std::setw(label_w) << runs[i].label << std::setw(label_w) << runs[k].label
            << std::setw(14) << mg.str() << std::setw(16) << cg.str() << std::setw(14)
            << kl_or_na(a, b) << kl_or_na(b, a) << "\n";
      }
    }
    return kExitOk;
  } catch (const Error& e) {
    err << e.what() << "\n";
    return kExitError;
  }
}

void list_problems(std::ostream& out) {
  for (ProblemId id : all_problem_ids()) {
    out << std::left << std::setw(14) << to_string(id) << describe(id) << "\n";
  }
}

}  // namespace kinv
