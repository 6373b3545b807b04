#include <fstream>
#include <stdexcept>

#include "semslam/app/commands.hpp"
#include "semslam/app/mesh.hpp"
#include "semslam/app/pipeline.hpp"
#include "semslam/errors.hpp"
#include "semslam/sim/dataset.hpp"

namespace semslam {

namespace {

template <typename Fn>
int guarded(std::ostream& log, Fn&& fn) {
  try {
    return fn();
  } catch (const FormatError& e) {
    log << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const InvalidSpec& e) {
    log << "error: invalid spec: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    return kExitData;
  }
}

}  // namespace

int cmd_simulate(const std::filesystem::path& spec_file, const std::filesystem::path& out_dir, std::ostream& log) {
  return guarded(log, [&] {
    const SceneSpec spec = scene_spec_from(KeyValueConfig::load(spec_file));
    write_dataset(simulate(spec), out_dir);
    return int(kExitOk);
  });
}

int cmd_solve(const std::filesystem::path& dataset_dir, const std::string& mode,
              const std::optional<std::filesystem::path>& config_file, const std::filesystem::path& out_dir,
              std::ostream& log) {
  RunConfig cfg;
  try {
    cfg.mode = parse_mode(mode);
  } catch (const std::invalid_argument& e) {
    log << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return guarded(log, [&] {
    if (config_file) apply_config(KeyValueConfig::load(*config_file), cfg);
    const Dataset ds = read_dataset(dataset_dir);
    const PipelineResult result = run_pipeline(ds, cfg);
    write_solution(result.solution, out_dir);
    if (result.last_report.status != OptimizerStatus::Converged) {
      log << "optimizer finished with status " << to_string(result.last_report.status) << '\n';
      return int(kExitNumerical);
    }
    return int(kExitOk);
  });
}

int cmd_eval(const std::filesystem::path& solution_dir, const std::filesystem::path& dataset_dir,
             const std::optional<std::filesystem::path>& append_to, std::ostream& out, std::ostream& log) {
  return guarded(log, [&] {
    const Solution s = read_solution(solution_dir);
    const Dataset ds = read_dataset(dataset_dir);
    EvalRecord r;
    r.mode = s.mode;
    r.ate_rmse_cm = 100.0 * ate_rmse(s.trajectory(), gt_trajectory(ds));
    r.n_keyframes = static_cast<int>(ds.keyframes.size());
    r.seed = ds.seed;
    const std::string line = to_json_line(r);
    out << line << '\n';
    if (append_to) {
      std::ofstream f(*append_to, std::ios::app);
      if (!f) throw std::runtime_error("cannot append to " + append_to->string());
      f << line << '\n';
    }
    return int(kExitOk);
  });
}

int cmd_export(const std::filesystem::path& solution_dir, const std::string& format,
               const std::optional<std::filesystem::path>& out_file, std::ostream& log) {
  if (format != "map-mesh" && format != "records") {
    log << "error: --format must be map-mesh or records\n";
    return kExitUsage;
  }
  return guarded(log, [&] {
    const Solution s = read_solution(solution_dir);
    const bool mesh = format == "map-mesh";
    const auto path = out_file ? *out_file : solution_dir / (mesh ? "map.ply" : "map.ndjson");
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    if (mesh) {
      write_map_mesh(s, f);
    } else {
      write_map_records(s, f);
    }
    return int(kExitOk);
  });
}

}  // namespace semslam
