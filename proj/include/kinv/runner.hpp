#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "kinv/config.hpp"
#include "kinv/inversion.hpp"
#include "kinv/reference.hpp"

namespace kinv {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitDiverged = 3;

struct RunOutcome {
  InversionResult result;
  std::optional<MomentSummary> oracle;
  nlohmann::json summary;
};

/// Runs the inversion and the optional oracle; no file I/O.
RunOutcome execute_run(const RunConfig& config);

/// Writes history.csv, summary.json and config_resolved.json into `dir`.
void write_run_outputs(const RunConfig& config, const RunOutcome& outcome,
                       const std::filesystem::path& dir);

int run_command(const std::filesystem::path& config_path,
                const std::vector<std::string>& overrides,
                const std::optional<std::string>& out_dir,
                const std::optional<std::uint64_t>& seed, std::ostream& out,
                std::ostream& err);

/// Prints means, standard deviations, oracle gaps and pairwise KL /
/// covariance gaps. All summaries must share a problem id.
int compare_command(const std::vector<std::filesystem::path>& summaries, std::ostream& out,
                    std::ostream& err);

void list_problems(std::ostream& out);

}  // namespace kinv
