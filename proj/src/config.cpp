#include "kinv/config.hpp"

#include <algorithm>
#include <fstream>
#include <initializer_list>
#include <string>

#include "kinv/errors.hpp"

namespace kinv {
namespace {

using nlohmann::json;

[[noreturn]] void config_error(std::string_view key, const std::string& message) {
  throw Error(ErrorKind::ConfigError, std::string(key) + ": " + message);
}

std::string join_key(std::string_view parent, std::string_view child) {
  return parent.empty() ? std::string(child) : std::string(parent) + "." + std::string(child);
}

void check_keys(const json& obj, std::string_view where,
                std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object()) config_error(where.empty() ? "<root>" : where, "expected an object");
  for (const auto& [key, value] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      config_error(join_key(where, key), "unknown key");
    }
  }
}

double number_at(const json& obj, std::string_view parent, const char* key, double fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number()) config_error(join_key(parent, key), "expected a number");
  return v.get<double>();
}

std::int64_t integer_at(const json& obj, std::string_view parent, const char* key,
                        std::int64_t fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (v.is_number_integer()) return v.get<std::int64_t>();
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (d == std::floor(d)) return static_cast<std::int64_t>(d);
  }
  config_error(join_key(parent, key), "expected an integer");
}

std::string string_at(const json& obj, std::string_view parent, const char* key,
                      std::string fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_string()) config_error(join_key(parent, key), "expected a string");
  return v.get<std::string>();
}

bool bool_at(const json& obj, std::string_view parent, const char* key, bool fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_boolean()) config_error(join_key(parent, key), "expected true or false");
  return v.get<bool>();
}

std::optional<GaussianBelief> belief_from_json(const json& j, std::string_view key,
                                               Eigen::Index n) {
  if (j.is_null()) return std::nullopt;
  check_keys(j, key, {"mean", "covariance"});
  if (!j.contains("mean")) config_error(join_key(key, "mean"), "missing");
  if (!j.contains("covariance")) config_error(join_key(key, "covariance"), "missing");
  Vector mean = vector_from_json(j.at("mean"), join_key(key, "mean"));
  if (mean.size() != n) {
    config_error(join_key(key, "mean"),
                 "expected " + std::to_string(n) + " entries, got " + std::to_string(mean.size()));
  }
  Matrix cov = matrix_from_json(j.at("covariance"), n, join_key(key, "covariance"));
  if (!is_spd(cov)) config_error(join_key(key, "covariance"), "not symmetric positive definite");
  return GaussianBelief(std::move(mean), std::move(cov));
}

json belief_to_json(const GaussianBelief& b) {
  return json{{"mean", to_json(b.mean())}, {"covariance", to_json(b.covariance())}};
}

struct ProblemDefaults {
  Vector initial_mean;
  Matrix initial_cov;
  std::optional<GaussianBelief> prior;
  double noise_variance = 0.01;
};

ProblemDefaults defaults_for(ProblemId id, Eigen::Index n_theta) {
  ProblemDefaults d;
  switch (id) {
    case ProblemId::Exponential:
    case ProblemId::Quadratic:
    case ProblemId::Cubic:
    case ProblemId::SignCubic:
    case ProblemId::Hyperbola:
      d.initial_mean = Vector::Constant(1, 1.0);
      d.initial_cov = Matrix::Constant(1, 1, 0.25);
      d.prior = GaussianBelief(Vector::Constant(1, 1.0), Matrix::Constant(1, 1, 100.0));
      break;
    case ProblemId::EllipticTwoParam: {
      d.initial_mean = Vector::Zero(2);
      d.initial_cov = Vector{{1.0, 100.0}}.asDiagonal();
      d.prior = GaussianBelief(d.initial_mean, d.initial_cov);
      break;
    }
    case ProblemId::Darcy:
      d.initial_mean = Vector::Zero(n_theta);
      d.initial_cov = Matrix::Identity(n_theta, n_theta);
      d.prior = GaussianBelief(Vector::Zero(n_theta),
                               100.0 * Matrix::Identity(n_theta, n_theta));
      break;
    case ProblemId::Linear:
      d.initial_mean = Vector::Zero(n_theta);
      d.initial_cov = Matrix::Identity(n_theta, n_theta);
      break;
  }
  return d;
}

std::optional<ScalarProblemKind> scalar_kind(ProblemId id) {
  switch (id) {
    case ProblemId::Exponential: return ScalarProblemKind::Exponential;
    case ProblemId::Quadratic: return ScalarProblemKind::Quadratic;
    case ProblemId::Cubic: return ScalarProblemKind::Cubic;
    case ProblemId::SignCubic: return ScalarProblemKind::SignCubic;
    case ProblemId::Hyperbola: return ScalarProblemKind::Hyperbola;
    default: return std::nullopt;
  }
}

}  // namespace

json to_json(const Vector& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

json to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
    rows.push_back(std::move(row));
  }
  return rows;
}

Vector vector_from_json(const json& j, std::string_view key) {
  if (j.is_number()) return Vector::Constant(1, j.get<double>());
  if (!j.is_array()) config_error(key, "expected an array of numbers");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) config_error(key, "entry " + std::to_string(i) + " is not a number");
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

Matrix matrix_from_json(const json& j, Eigen::Index n, std::string_view key) {
  if (j.is_number()) return j.get<double>() * Matrix::Identity(n, n);
  if (!j.is_array()) config_error(key, "expected a number, a diagonal, or nested rows");
  if (!j.empty() && j.front().is_number()) {
    const Vector diag = vector_from_json(j, key);
    if (diag.size() != n) {
      config_error(key, "diagonal has " + std::to_string(diag.size()) + " entries, expected " +
                            std::to_string(n));
    }
    return diag.asDiagonal();
  }
  const auto rows = static_cast<Eigen::Index>(j.size());
  if (rows == 0) config_error(key, "empty matrix");
  const auto cols = static_cast<Eigen::Index>(j.front().is_array() ? j.front().size() : 0);
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const json& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      config_error(key, "row " + std::to_string(r) + " has the wrong length");
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      const json& v = row[static_cast<std::size_t>(c)];
      if (!v.is_number()) config_error(key, "non-numeric entry");
      m(r, c) = v.get<double>();
    }
  }
  if (n > 0 && (m.rows() != n || m.cols() != n)) {
    config_error(key, "expected " + std::to_string(n) + "x" + std::to_string(n));
  }
  return m;
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::ConfigError, path.string() + ": " + e.what());
  }
}

void apply_override(json& config, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw Error(ErrorKind::ConfigError,
                "override '" + std::string(assignment) + "' is not key=value");
  }
  const std::string key(assignment.substr(0, eq));
  const std::string text(assignment.substr(eq + 1));
  json value = json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (value.is_discarded()) value = text;

  json* node = &config;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot - start);
    if (part.empty()) throw Error(ErrorKind::ConfigError, key + ": empty key segment");
    if (!node->is_object()) {
      if (!node->is_null()) throw Error(ErrorKind::ConfigError, key + ": parent is not an object");
      *node = json::object();
    }
    if (dot == std::string::npos) {
      (*node)[part] = std::move(value);
      return;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
}

RunConfig resolve_run_config(const json& raw, const std::filesystem::path& base_dir) {
  check_keys(raw, "",
             {"problem", "algorithm", "omega_policy", "nu_factor", "max_iterations",
              "divergence_threshold", "parallel", "initial", "oracle", "seed", "output_dir"});
  RunConfig cfg;
  json resolved = json::object();

  // Problem ------------------------------------------------------------------
  if (!raw.contains("problem")) config_error("problem", "missing");
  const json& pj = raw.at("problem");
  check_keys(pj, "problem",
             {"id", "theta_ref", "theta_ref_file", "y", "sigma_eta", "noise", "G", "darcy"});
  const std::string id_name = string_at(pj, "problem", "id", "");
  const auto id = parse_problem_id(id_name);
  if (!id) config_error("problem.id", "unrecognised problem '" + id_name + "'");
  cfg.problem = *id;
  json rp = json{{"id", id_name}};

  if (pj.contains("G") && cfg.problem != ProblemId::Linear) {
    config_error("problem.G", "only valid for the linear problem");
  }
  if (pj.contains("darcy") && cfg.problem != ProblemId::Darcy) {
    config_error("problem.darcy", "only valid for the darcy problem");
  }

  if (auto kind = scalar_kind(cfg.problem)) {
    cfg.model = make_scalar_model(*kind);
  } else if (cfg.problem == ProblemId::EllipticTwoParam) {
    cfg.model = make_elliptic2_model();
  } else if (cfg.problem == ProblemId::Darcy) {
    DarcyConfig dc;
    if (pj.contains("darcy")) {
      const json& dj = pj.at("darcy");
      check_keys(dj, "problem.darcy",
                 {"cells", "n_kl", "tau", "d", "source_left", "source_right", "n_obs"});
      dc.cells = static_cast<int>(integer_at(dj, "problem.darcy", "cells", dc.cells));
      dc.n_kl = static_cast<int>(integer_at(dj, "problem.darcy", "n_kl", dc.n_kl));
      dc.tau = number_at(dj, "problem.darcy", "tau", dc.tau);
      dc.d = number_at(dj, "problem.darcy", "d", dc.d);
      dc.source_left = number_at(dj, "problem.darcy", "source_left", dc.source_left);
      dc.source_right = number_at(dj, "problem.darcy", "source_right", dc.source_right);
      dc.n_obs = static_cast<int>(integer_at(dj, "problem.darcy", "n_obs", dc.n_obs));
    }
    try {
      dc.validate();
    } catch (const Error& e) {
      config_error("problem.darcy", e.detail());
    }
    cfg.model = make_darcy_model(dc);
    rp["darcy"] = json{{"cells", dc.cells},       {"n_kl", dc.n_kl},
                       {"tau", dc.tau},           {"d", dc.d},
                       {"source_left", dc.source_left}, {"source_right", dc.source_right},
                       {"n_obs", dc.n_obs}};
  } else {
    if (!pj.contains("G")) config_error("problem.G", "missing matrix for the linear problem");
    const Matrix g = matrix_from_json(pj.at("G"), 0, "problem.G");
    cfg.model = make_linear_model(g);
    rp["G"] = to_json(g);
  }
  const Eigen::Index n_theta = cfg.model.n_theta;
  const Eigen::Index n_y = cfg.model.n_y;
  const ProblemDefaults defaults = defaults_for(cfg.problem, n_theta);

  cfg.seed = static_cast<std::uint64_t>(integer_at(raw, "", "seed", 0));
  resolved["seed"] = cfg.seed;

  Matrix sigma_eta = defaults.noise_variance * Matrix::Identity(n_y, n_y);
  if (pj.contains("sigma_eta")) {
    sigma_eta = matrix_from_json(pj.at("sigma_eta"), n_y, "problem.sigma_eta");
  }
  if (!is_spd(sigma_eta)) config_error("problem.sigma_eta", "not symmetric positive definite");
  rp["sigma_eta"] = to_json(sigma_eta);

  if (pj.contains("theta_ref") && pj.contains("theta_ref_file")) {
    config_error("problem.theta_ref_file", "give either theta_ref or theta_ref_file");
  }
  if (pj.contains("theta_ref")) {
    cfg.theta_ref = vector_from_json(pj.at("theta_ref"), "problem.theta_ref");
  } else if (pj.contains("theta_ref_file")) {
    std::filesystem::path file = string_at(pj, "problem", "theta_ref_file", "");
    if (file.is_relative()) file = base_dir / file;
    std::vector<double> values;
    try {
      values = read_vector_file(file.string());
    } catch (const Error& e) {
      config_error("problem.theta_ref_file", e.detail());
    }
    cfg.theta_ref = Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
  } else if (scalar_kind(cfg.problem)) {
    cfg.theta_ref = Vector::Constant(1, 2.0);
  }
  if (cfg.theta_ref && cfg.theta_ref->size() != n_theta) {
    config_error("problem.theta_ref", "expected " + std::to_string(n_theta) + " entries");
  }
  if (cfg.theta_ref) rp["theta_ref"] = to_json(*cfg.theta_ref);

  const std::string noise_name = string_at(pj, "problem", "noise", "none");
  NoiseKind noise = NoiseKind::None;
  if (noise_name == "gaussian") {
    noise = NoiseKind::Gaussian;
  } else if (noise_name != "none") {
    config_error("problem.noise", "expected 'none' or 'gaussian'");
  }
  rp["noise"] = noise_name;

  Vector y;
  if (pj.contains("y")) {
    y = vector_from_json(pj.at("y"), "problem.y");
  } else if (cfg.problem == ProblemId::EllipticTwoParam) {
    y = Vector{{27.5, 79.7}};
  } else if (cfg.theta_ref) {
    try {
      y = make_reference_observation(cfg.model, *cfg.theta_ref, sigma_eta, cfg.seed, noise);
    } catch (const Error& e) {
      config_error("problem.theta_ref", e.detail());
    }
  } else {
    config_error("problem.y", "missing: give y or theta_ref");
  }
  if (y.size() != n_y) config_error("problem.y", "expected " + std::to_string(n_y) + " entries");
  rp["y"] = to_json(y);
  resolved["problem"] = rp;
  cfg.inverse_problem = make_inverse_problem(cfg.model, y, sigma_eta);

  // Policy -------------------------------------------------------------------
  const std::string algorithm = string_at(raw, "", "algorithm", "uki");
  if (algorithm != "uki" && algorithm != "exki") {
    config_error("algorithm", "expected 'uki' or 'exki'");
  }
  const std::string omega = string_at(raw, "", "omega_policy", "adaptive");
  if (omega != "adaptive" && omega != "fixed") {
    config_error("omega_policy", "expected 'adaptive' or 'fixed'");
  }

  std::optional<GaussianBelief> initial;
  if (raw.contains("initial")) {
    initial = belief_from_json(raw.at("initial"), "initial", n_theta);
  }
  if (!initial) initial = GaussianBelief(defaults.initial_mean, defaults.initial_cov);

  cfg.policy = InversionPolicy{*initial};
  cfg.policy.algorithm = algorithm == "uki" ? Algorithm::Uki : Algorithm::Exki;
  cfg.policy.omega_policy = omega == "adaptive" ? OmegaPolicy::Adaptive : OmegaPolicy::Fixed;
  cfg.policy.nu_factor = number_at(raw, "", "nu_factor", 2.0);
  cfg.policy.max_iterations = static_cast<int>(integer_at(raw, "", "max_iterations", 20));
  cfg.policy.divergence_threshold = number_at(raw, "", "divergence_threshold", 1e8);
  cfg.policy.parallel_evaluations = bool_at(raw, "", "parallel", false);
  if (!(cfg.policy.nu_factor > 0.0)) config_error("nu_factor", "must be > 0");
  if (cfg.policy.max_iterations < 1) config_error("max_iterations", "must be >= 1");
  if (!(cfg.policy.divergence_threshold > 0.0)) config_error("divergence_threshold", "must be > 0");
  if (cfg.policy.algorithm == Algorithm::Exki && !cfg.model.jacobian) {
    config_error("algorithm", "exki needs an analytic Jacobian, which '" + id_name + "' lacks");
  }
  resolved["algorithm"] = algorithm;
  resolved["omega_policy"] = omega;
  resolved["nu_factor"] = cfg.policy.nu_factor;
  resolved["max_iterations"] = cfg.policy.max_iterations;
  resolved["divergence_threshold"] = cfg.policy.divergence_threshold;
  resolved["parallel"] = cfg.policy.parallel_evaluations;
  resolved["initial"] = belief_to_json(cfg.policy.initial);

  // Oracle -------------------------------------------------------------------
  if (raw.contains("oracle") && !raw.at("oracle").is_null()) {
    const json& oj = raw.at("oracle");
    check_keys(oj, "oracle",
               {"type", "prior", "step_size", "n_samples", "burn_in", "init", "lo", "hi",
                "n_nodes"});
    OracleConfig oc;
    const std::string type = string_at(oj, "oracle", "type", "");
    json ro = json{{"type", type}};
    auto resolve_prior = [&] {
      if (oj.contains("prior")) {
        oc.prior = belief_from_json(oj.at("prior"), "oracle.prior", n_theta);
      } else {
        oc.prior = defaults.prior;
      }
      ro["prior"] = oc.prior ? belief_to_json(*oc.prior) : json(nullptr);
    };
    if (type == "mcmc") {
      oc.type = OracleType::Mcmc;
      resolve_prior();
      oc.step_size = number_at(oj, "oracle", "step_size", oc.step_size);
      oc.n_samples = integer_at(oj, "oracle", "n_samples", oc.n_samples);
      oc.burn_in = integer_at(oj, "oracle", "burn_in", oc.n_samples / 5);
      if (oj.contains("init")) {
        oc.init = vector_from_json(oj.at("init"), "oracle.init");
      } else {
        oc.init = cfg.theta_ref ? *cfg.theta_ref : cfg.policy.initial.mean();
      }
      if (oc.init.size() != n_theta) config_error("oracle.init", "wrong length");
      if (!(oc.step_size > 0.0)) config_error("oracle.step_size", "must be > 0");
      if (oc.n_samples < 1) config_error("oracle.n_samples", "must be >= 1");
      if (oc.burn_in < 0 || oc.burn_in >= oc.n_samples) {
        config_error("oracle.burn_in", "must satisfy 0 <= burn_in < n_samples");
      }
      ro["step_size"] = oc.step_size;
      ro["n_samples"] = oc.n_samples;
      ro["burn_in"] = oc.burn_in;
      ro["init"] = to_json(oc.init);
    } else if (type == "pullback") {
      oc.type = OracleType::Pullback;
      if (!cfg.model.inverse) {
        config_error("oracle.type", "problem '" + id_name + "' has no analytic inverse");
      }
      oc.n_samples = integer_at(oj, "oracle", "n_samples", 100000);
      if (oc.n_samples < 2) config_error("oracle.n_samples", "must be >= 2");
      ro["n_samples"] = oc.n_samples;
    } else if (type == "quadrature") {
      oc.type = OracleType::Quadrature;
      if (n_theta != 1) config_error("oracle.type", "quadrature needs a one-parameter problem");
      resolve_prior();
      oc.lo = number_at(oj, "oracle", "lo", oc.lo);
      oc.hi = number_at(oj, "oracle", "hi", oc.hi);
      oc.n_nodes = static_cast<int>(integer_at(oj, "oracle", "n_nodes", oc.n_nodes));
      if (!(oc.lo < oc.hi)) config_error("oracle.hi", "must exceed oracle.lo");
      if (oc.n_nodes < 1001 || oc.n_nodes % 2 == 0) {
        config_error("oracle.n_nodes", "must be odd and >= 1001");
      }
      ro["lo"] = oc.lo;
      ro["hi"] = oc.hi;
      ro["n_nodes"] = oc.n_nodes;
    } else {
      config_error("oracle.type", "expected 'mcmc', 'pullback' or 'quadrature'");
    }
    cfg.oracle = std::move(oc);
    resolved["oracle"] = ro;
  }

  cfg.output_dir = string_at(raw, "", "output_dir", "out");
  resolved["output_dir"] = cfg.output_dir;
  cfg.resolved = std::move(resolved);
  return cfg;
}

}  // namespace kinv
