#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>

namespace semslam {

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitNumerical = 3 };

int cmd_simulate(const std::filesystem::path& spec_file, const std::filesystem::path& out_dir, std::ostream& log);

/// Writes the solution even when the optimizer fails; returns kExitNumerical
/// unless the final batch converged.
int cmd_solve(const std::filesystem::path& dataset_dir, const std::string& mode,
              const std::optional<std::filesystem::path>& config_file, const std::filesystem::path& out_dir,
              std::ostream& log);

/// Prints the evaluation record; appends it to `append_to` when given.
int cmd_eval(const std::filesystem::path& solution_dir, const std::filesystem::path& dataset_dir,
             const std::optional<std::filesystem::path>& append_to, std::ostream& out, std::ostream& log);

/// format is "map-mesh" (map.ply) or "records" (map.ndjson), written into the
/// solution directory unless `out_file` is given.
int cmd_export(const std::filesystem::path& solution_dir, const std::string& format,
               const std::optional<std::filesystem::path>& out_file, std::ostream& log);

}  // namespace semslam
