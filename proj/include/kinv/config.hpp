#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

#include "kinv/forward_models.hpp"
#include "kinv/inversion.hpp"

namespace kinv {

enum class OracleType { Mcmc, Pullback, Quadrature };

struct OracleConfig {
  OracleType type = OracleType::Mcmc;
  std::optional<GaussianBelief> prior;  // mcmc / quadrature; empty = flat
  // mcmc
  double step_size = 1.0;
  std::int64_t n_samples = 1000000;
  std::int64_t burn_in = 200000;
  Vector init;
  // quadrature
  double lo = -10.0;
  double hi = 10.0;
  int n_nodes = 200001;
};

/// A fully resolved run: every default is filled in and `resolved` holds the
/// JSON that reproduces this exact run when fed back in.
struct RunConfig {
  ProblemId problem = ProblemId::Exponential;
  ForwardModel model;
  InverseProblem inverse_problem;
  std::optional<Vector> theta_ref;
  InversionPolicy policy{GaussianBelief(Vector::Zero(1), Matrix::Identity(1, 1))};
  std::optional<OracleConfig> oracle;
  std::uint64_t seed = 0;
  std::string output_dir;
  nlohmann::json resolved;
};

nlohmann::json read_json_file(const std::filesystem::path& path);

/// Applies `key=value` with a dotted key, e.g. `initial.mean=[2.0]`. The value
/// is parsed as JSON when possible and kept as a string otherwise.
void apply_override(nlohmann::json& config, std::string_view assignment);

/// Resolves defaults and validates. Relative file paths are taken relative to
/// `base_dir`. Errors are ConfigError naming the offending key.
RunConfig resolve_run_config(const nlohmann::json& raw,
                             const std::filesystem::path& base_dir = ".");

// JSON <-> Eigen helpers shared with the summary writer.
nlohmann::json to_json(const Vector& v);
nlohmann::json to_json(const Matrix& m);
Vector vector_from_json(const nlohmann::json& j, std::string_view key);
/// Accepts a number (times identity), a flat array (diagonal) or nested rows.
Matrix matrix_from_json(const nlohmann::json& j, Eigen::Index n, std::string_view key);

}  // namespace kinv
