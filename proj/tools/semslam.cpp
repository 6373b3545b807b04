#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "semslam/app/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Semantic SLAM back-end: simulate, solve, eval, export"};
  app.require_subcommand(1);

  std::string spec, out, dataset, mode, config, solution, format, append, out_file;

  auto* sim = app.add_subcommand("simulate", "Generate a synthetic dataset");
  sim->add_option("--spec", spec, "Scene spec (key = value)")->required();
  sim->add_option("--out", out, "Output directory")->required();

  auto* solve = app.add_subcommand("solve", "Run the back-end over a dataset");
  solve->add_option("--dataset", dataset, "Dataset directory")->required();
  solve->add_option("--mode", mode, "P, PP, PP+M, PO or PPO+MS")->required();
  solve->add_option("--config", config, "Config overrides (key = value)");
  solve->add_option("--out", out, "Solution directory")->required();

  auto* eval = app.add_subcommand("eval", "ATE of a solution against ground truth");
  eval->add_option("--solution", solution, "Solution directory")->required();
  eval->add_option("--dataset", dataset, "Dataset directory")->required();
  eval->add_option("--append", append, "Append the record to this file");

  auto* exp = app.add_subcommand("export", "Export the map");
  exp->add_option("--solution", solution, "Solution directory")->required();
  exp->add_option("--format", format, "map-mesh or records")->required();
  exp->add_option("--out", out_file, "Output file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : semslam::kExitUsage;
  }

  auto opt = [](const std::string& s) { return s.empty() ? std::nullopt : std::optional<std::filesystem::path>(s); };
  if (*sim) return semslam::cmd_simulate(spec, out, std::cerr);
  if (*solve) return semslam::cmd_solve(dataset, mode, opt(config), out, std::cerr);
  if (*eval) return semslam::cmd_eval(solution, dataset, opt(append), std::cout, std::cerr);
  return semslam::cmd_export(solution, format, opt(out_file), std::cerr);
}
