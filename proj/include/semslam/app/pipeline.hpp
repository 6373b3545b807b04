#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "semslam/app/config.hpp"
#include "semslam/assoc/association.hpp"
#include "semslam/eval/trajectory.hpp"
#include "semslam/factors/factor.hpp"
#include "semslam/graph/optimizer.hpp"
#include "semslam/sim/simulator.hpp"

namespace semslam {

enum class Mode { P, PP, PPM, PO, PPOMS };

/// "P", "PP", "PP+M", "PO", "PPO+MS".
std::string to_string(Mode mode);
/// Throws std::invalid_argument for an unknown name.
Mode parse_mode(const std::string& name);

bool uses_planes(Mode m);
bool uses_manhattan(Mode m);
bool uses_objects(Mode m);
bool uses_support(Mode m);

struct NoiseConfig {
  double pixel_sigma = 1.0;
  double huber_width = 1.5;
  double sigma_d = 0.02;
  double sigma_par = 0.01;
  double sigma_per = 0.01;
  double sigma_t = 0.05;
  Eigen::Vector3d plane_sigmas = Eigen::Vector3d(0.01, 0.01, 0.05);
  double sigma_p = 0.1;
  /// Scale on the score-derived sigma of box observations.
  double iou_sigma_scale = 1.0;
  double odom_rot_sigma = 0.01;
  double odom_trans_sigma = 0.01;
};

struct RunConfig {
  Mode mode = Mode::P;
  AssocConfig assoc;
  OptimizerConfig optimizer;
  NoiseConfig noise;
  /// Batch solve after every this many keyframes, and at the end.
  int batch_every = 5;
  /// Point-plane association distance, meters.
  double point_plane_tol = 0.1;
  /// Minimum ray angle for point triangulation, radians.
  double min_parallax = 0.02;
  /// Manhattan relation tolerance, radians.
  double manhattan_tol = 10.0 * M_PI / 180.0;
  /// Largest support gap accepted for tangency, meters.
  double support_tol = 0.2;
  /// Camera baseline required before an object is triangulated, meters.
  double object_min_baseline = 0.3;
  /// Iteration cap of the object-only refinement run before each joint solve.
  int object_iterations = 500;
};

/// Applies every known key of `kv` onto `cfg`; unknown keys are an error.
/// Keys: assoc.*, optimizer.*, noise.*, pipeline.*.
void apply_config(const KeyValueConfig& kv, RunConfig& cfg);

/// Scene spec from `key = value` text; unknown keys are an error.
SceneSpec scene_spec_from(const KeyValueConfig& kv);

struct SolutionPlane {
  int id = -1;
  /// World frame.
  Plane plane;
  int anchor = -1;
  std::vector<int> tracks;
};

struct SolutionQuadric {
  int id = -1;
  /// World frame.
  DualQuadric quadric;
  int anchor = -1;
  int class_id = 0;
  int support = -1;
};

struct Solution {
  std::string mode;
  std::string status;
  int iterations = 0;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  std::array<int, kFactorKindCount> factor_counts{};
  std::vector<std::pair<int, Pose>> poses;
  std::vector<std::pair<int, Eigen::Vector3d>> points;
  std::vector<SolutionPlane> planes;
  std::vector<SolutionQuadric> quadrics;

  Trajectory trajectory() const { return Trajectory(poses); }
};

struct PipelineResult {
  Solution solution;
  OptimizeReport last_report;
  /// Factor graph after the final batch, for inspection.
  FactorGraph graph;
};

/// Runs the whole frame loop over a dataset.
PipelineResult run_pipeline(const Dataset& ds, const RunConfig& cfg);

inline constexpr const char* kSolutionFileName = "solution.ndjson";

void write_solution(const Solution& s, const std::filesystem::path& dir);
/// Throws FormatError.
Solution read_solution(const std::filesystem::path& dir);

/// Ground-truth trajectory of a dataset.
Trajectory gt_trajectory(const Dataset& ds);

}  // namespace semslam
