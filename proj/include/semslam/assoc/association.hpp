#pragma once

#include <optional>
#include <set>
#include <vector>

#include <Eigen/Core>

#include "semslam/geometry/bbox.hpp"
#include "semslam/geometry/camera.hpp"
#include "semslam/geometry/plane.hpp"
#include "semslam/geometry/pose.hpp"
#include "semslam/geometry/quadric.hpp"

namespace semslam {

struct AssocConfig {
  /// Plane keypoint-overlap thresholds.
  int th_H = 8;
  int th_L = 2;
  /// Object keypoint-overlap thresholds.
  int th_high = 10;
  int th_low = 3;
  double score_min = 0.85;
  double plane_angle_tol = 10.0 * M_PI / 180.0;
  double plane_dist_tol = 0.1;
  /// Quadrics closer than this along the optical axis are not candidates.
  double min_candidate_depth = 0.1;
};

/// Throws std::invalid_argument on inconsistent thresholds.
void check_config(const AssocConfig& cfg);

enum class Decision { Matched, New, Ignored };

struct MatchDecision {
  Decision decision = Decision::New;
  /// Landmark id when matched, -1 otherwise.
  int landmark = -1;

  bool operator==(const MatchDecision&) const = default;
};

// --- objects ---------------------------------------------------------------

/// A map quadric in front of the camera with the image positions of the point
/// landmarks associated with it.
struct ObjectCandidate {
  int id = -1;
  std::vector<Eigen::Vector2d> keypoints;
};

/// p(b, q): number of the candidate's keypoints inside each box.
Eigen::MatrixXi overlap_counts(const std::vector<BBox>& dets, const std::vector<ObjectCandidate>& candidates);

/// Assignment over cost K - p with K = max p. A pair is matched when
/// p >= th_high; a detection is new when its pair has p <= th_low or it is left
/// unassigned; anything else is ignored.
std::vector<MatchDecision> match_objects(const Eigen::MatrixXi& p, const std::vector<int>& candidate_ids,
                                         const AssocConfig& cfg);

/// Same, computing p from the candidates. Detections below score_min are
/// ignored outright.
std::vector<MatchDecision> match_objects(const std::vector<BBox>& dets, const std::vector<ObjectCandidate>& candidates,
                                         const AssocConfig& cfg);

/// Candidate gate: quadric center deeper than cfg.min_candidate_depth.
bool quadric_in_front(const DualQuadric& q_world, const Pose& camera_pose, const AssocConfig& cfg);

// --- planes ----------------------------------------------------------------

struct PlaneDetection {
  /// Plane in the camera frame.
  Plane plane;
  std::vector<int> inlier_tracks;
};

struct MapPlane {
  int id = -1;
  /// Plane in world coordinates.
  Plane plane;
  std::set<int> tracks;
};

/// Angle and offset test in the camera frame, with normals sign-aligned.
bool planes_close(const Plane& a, const Plane& b, const AssocConfig& cfg);

MatchDecision match_planes(const PlaneDetection& det, const std::vector<MapPlane>& map_planes, const Pose& camera_pose,
                           const AssocConfig& cfg);

// --- initialization --------------------------------------------------------

struct ObjectView {
  BBox box;
  Pose camera_pose;
};

/// Ellipsoid from bbox rays: triangulated when two views are more than
/// min_baseline apart, otherwise placed at depth_hint along the first view's
/// center ray. Axis-aligned in the world. nullopt when there is no depth
/// source or the result does not overlap every source box.
std::optional<DualQuadric> init_quadric(const std::vector<ObjectView>& views, const Camera& cam,
                                        std::optional<double> depth_hint, double min_baseline = 0.05);

/// Landmarks whose id is in the mask set and that lie within dist_tol of the plane.
std::vector<int> associate_points_to_plane(const std::vector<std::pair<int, Eigen::Vector3d>>& points,
                                           const std::set<int>& mask, const Plane& plane, double dist_tol);

}  // namespace semslam
