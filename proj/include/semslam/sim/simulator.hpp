#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "semslam/geometry/bbox.hpp"
#include "semslam/geometry/camera.hpp"
#include "semslam/geometry/plane.hpp"
#include "semslam/geometry/pose.hpp"
#include "semslam/geometry/quadric.hpp"

namespace semslam {

struct SimNoise {
  double pixel_sigma = 1.0;
  double bbox_sigma = 2.0;
  double plane_angle_sigma = 0.01;
  double plane_dist_sigma = 0.01;
  double odom_rot_sigma = 0.01;
  double odom_trans_sigma = 0.01;
  /// Per-step sigma of the multiplicative odometry scale random walk.
  double scale_drift_sigma = 0.002;

  static SimNoise zero() { return {0, 0, 0, 0, 0, 0, 0}; }
};

enum class TrajectoryKind { Orbit, Corridor };

struct SceneSpec {
  std::uint64_t seed = 0;
  int n_points = 200;
  int n_planes = 4;
  int n_quadrics = 3;
  /// Axis-aligned planes; otherwise walls are tilted off the axes.
  bool manhattan = true;
  TrajectoryKind trajectory = TrajectoryKind::Orbit;
  /// Orbit radius or corridor length, meters.
  double trajectory_size = 2.0;
  int n_keyframes = 20;
  /// Keyframes a feature track survives before the point is re-detected
  /// under a fresh track id; 0 keeps one track per point. Track ends are
  /// staggered per point.
  int track_length = 0;
  SimNoise noise;
  double detection_dropout = 0.0;
  /// Write a canonical point cloud per object.
  bool object_clouds = true;
  Camera camera;
};

/// Throws InvalidSpec.
void check_spec(const SceneSpec& spec);

struct GroundTruth {
  std::vector<Pose> poses;
  std::vector<Eigen::Vector3d> points;
  std::vector<Plane> planes;
  std::vector<DualQuadric> quadrics;
  std::vector<int> quadric_class;
  /// (quadric, plane) pairs in tangent contact.
  std::vector<std::pair<int, int>> supports;
  std::vector<std::pair<int, int>> parallel;
  std::vector<std::pair<int, int>> perpendicular;
  /// Per object: surface samples scaled so the longest semi-axis is 1, in an
  /// arbitrary rotation. Empty when clouds are disabled.
  std::vector<std::vector<Eigen::Vector3d>> clouds;
};

/// Deterministic in spec.seed.
GroundTruth generate_scene(const SceneSpec& spec);

struct PointObservation {
  int frame = 0;
  int track = 0;
  Eigen::Vector2d pixel = Eigen::Vector2d::Zero();
  /// Index into the ground-truth points.
  int gt_id = -1;
};

struct PlaneObservation {
  int frame = 0;
  /// Plane in the camera frame.
  Plane plane;
  std::vector<int> inlier_tracks;
  /// Ground-truth plane index; -1 when unknown. Not used by the solver.
  int gt_id = -1;
};

struct ObjectObservation {
  int frame = 0;
  /// Carries class_id and score.
  BBox box;
  /// Point tracks observed inside the box.
  std::vector<int> tracks;
  /// Point-cloud file relative to the dataset directory, empty if none.
  std::string cloud_file;
  int gt_id = -1;
};

struct KeyframeRecord {
  int id = 0;
  /// Relative motion from the previous keyframe; absolute for the first one.
  Pose odom;
  Pose gt_pose;
};

struct Dataset {
  std::uint64_t seed = 0;
  Camera camera;
  std::vector<KeyframeRecord> keyframes;
  std::vector<PointObservation> points;
  std::vector<PlaneObservation> planes;
  std::vector<ObjectObservation> objects;
  std::vector<Eigen::Vector3d> gt_points;
  std::vector<Plane> gt_planes;
  std::vector<DualQuadric> gt_quadrics;
  std::vector<std::pair<int, int>> gt_supports;
  /// Cloud contents keyed by file name.
  std::vector<std::pair<std::string, std::vector<Eigen::Vector3d>>> clouds;
};

/// Noisy per-keyframe observations and odometry. Frame k draws from its own
/// random stream derived from (seed, k).
Dataset generate_observations(const GroundTruth& gt, const Camera& cam, const SceneSpec& spec);

/// Convenience: generate_scene then generate_observations with spec.camera.
Dataset simulate(const SceneSpec& spec);

/// Camera pose at `eye` looking at `target`, image y pointing down.
Pose look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target);

}  // namespace semslam
