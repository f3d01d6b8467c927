#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "kinv/runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Kalman inversion experiments (UKI / ExKI) with reference oracles"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_dir;
  std::uint64_t seed = 0;
  auto* run = app.add_subcommand("run", "run one inversion described by a JSON config");
  run->add_option("--config", config_path, "run configuration (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  run->add_option("--set", overrides, "dotted key=value override, repeatable");
  auto* out_opt = run->add_option("--out", out_dir, "output directory");
  auto* seed_opt = run->add_option("--seed", seed, "random seed (noise and oracles)");

  std::vector<std::string> summaries;
  auto* compare = app.add_subcommand("compare", "tabulate two or more summary.json files");
  compare->add_option("summaries", summaries, "summary.json paths")->required()->expected(2, -1);

  auto* list = app.add_subcommand("list-problems", "list the available forward models");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kinv::kExitUsage;
  }

  if (*run) {
    std::optional<std::string> out;
    if (*out_opt) out = out_dir;
    std::optional<std::uint64_t> s;
    if (*seed_opt) s = seed;
    return kinv::run_command(config_path, overrides, out, s, std::cout, std::cerr);
  }
  if (*compare) {
    std::vector<std::filesystem::path> paths(summaries.begin(), summaries.end());
    return kinv::compare_command(paths, std::cout, std::cerr);
  }
  if (*list) {
    kinv::list_problems(std::cout);
    return kinv::kExitOk;
  }
  return kinv::kExitUsage;
}
