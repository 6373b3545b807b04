#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

#include "semslam/assoc/association.hpp"
#include "semslam/assoc/hungarian.hpp"
#include "semslam/errors.hpp"
#include "semslam/geometry/projection.hpp"

namespace semslam {

void check_config(const AssocConfig& cfg) {
  if (cfg.th_L > cfg.th_H || cfg.th_low > cfg.th_high || cfg.th_L < 0 || cfg.th_low < 0)
    throw std::invalid_argument("assoc config: need 0 <= th_L <= th_H and 0 <= th_low <= th_high");
  if (!(cfg.score_min >= 0.0 && cfg.score_min <= 1.0)) throw std::invalid_argument("assoc config: score_min");
  if (!(cfg.plane_angle_tol > 0.0) || !(cfg.plane_dist_tol > 0.0))
    throw std::invalid_argument("assoc config: plane tolerances must be positive");
}

Eigen::MatrixXi overlap_counts(const std::vector<BBox>& dets, const std::vector<ObjectCandidate>& candidates) {
  Eigen::MatrixXi p = Eigen::MatrixXi::Zero(static_cast<int>(dets.size()), static_cast<int>(candidates.size()));
  for (std::size_t i = 0; i < dets.size(); ++i) {
    for (std::size_t j = 0; j < candidates.size(); ++j) {
      int n = 0;
      for (const auto& k : candidates[j].keypoints) n += dets[i].contains(k.x(), k.y()) ? 1 : 0;
      p(i, j) = n;
    }
  }
  return p;
}

std::vector<MatchDecision> match_objects(const Eigen::MatrixXi& p, const std::vector<int>& candidate_ids,
                                         const AssocConfig& cfg) {
  if (static_cast<std::size_t>(p.cols()) != candidate_ids.size())
    throw std::invalid_argument("match_objects: column count differs from candidate ids");
  std::vector<MatchDecision> out(p.rows());
  if (p.rows() == 0 || p.cols() == 0) return out;

  const double k = p.maxCoeff();
  const Eigen::MatrixXd cost = k - p.cast<double>().array();
  const std::vector<int> assignment = hungarian(cost);
  for (int i = 0; i < p.rows(); ++i) {
    const int j = assignment[i];
    if (j < 0) continue;
    const int overlap = p(i, j);
    if (overlap >= cfg.th_high) {
      out[i] = {Decision::Matched, candidate_ids[j]};
    } else if (overlap <= cfg.th_low) {
      out[i] = {Decision::New, -1};
    } else {
      out[i] = {Decision::Ignored, -1};
    }
  }
  return out;
}

std::vector<MatchDecision> match_objects(const std::vector<BBox>& dets, const std::vector<ObjectCandidate>& candidates,
                                         const AssocConfig& cfg) {
  std::vector<BBox> kept;
  std::vector<int> index;
  for (std::size_t i = 0; i < dets.size(); ++i) {
    if (dets[i].score >= cfg.score_min) {
      kept.push_back(dets[i]);
      index.push_back(static_cast<int>(i));
    }
  }
  std::vector<int> ids;
  for (const auto& c : candidates) ids.push_back(c.id);
  const auto decided = match_objects(overlap_counts(kept, candidates), ids, cfg);
  std::vector<MatchDecision> out(dets.size(), MatchDecision{Decision::Ignored, -1});
  for (std::size_t i = 0; i < kept.size(); ++i) out[index[i]] = decided[i];
  return out;
}

bool quadric_in_front(const DualQuadric& q_world, const Pose& camera_pose, const AssocConfig& cfg) {
  return (camera_pose.inverse() * q_world.center()).z() > cfg.min_candidate_depth;
}

bool planes_close(const Plane& a, const Plane& b, const AssocConfig& cfg) {
  Eigen::Vector4d pb = b.coeffs();
  if (a.normal().dot(pb.head<3>()) < 0.0) pb = -pb;
  const double angle = std::acos(std::clamp(a.normal().dot(pb.head<3>()), -1.0, 1.0));
  return angle < cfg.plane_angle_tol && std::abs(a.distance() - pb(3)) < cfg.plane_dist_tol;
}

MatchDecision match_planes(const PlaneDetection& det, const std::vector<MapPlane>& map_planes, const Pose& camera_pose,
                           const AssocConfig& cfg) {
  const Pose world_to_camera = camera_pose.inverse();
  int best = -1;
  int best_common = -1;
  int max_common = 0;
  bool any_geometric = false;
  for (std::size_t j = 0; j < map_planes.size(); ++j) {
    const MapPlane& m = map_planes[j];
    int common = 0;
    for (int t : det.inlier_tracks) common += m.tracks.count(t) ? 1 : 0;
    max_common = std::max(max_common, common);
    const bool geometric = planes_close(det.plane, transform_plane(m.plane, world_to_camera), cfg);
    any_geometric = any_geometric || geometric;
    if (geometric && common > cfg.th_H && common > best_common) {
      best = static_cast<int>(j);
      best_common = common;
    }
  }
  if (best >= 0) return {Decision::Matched, map_planes[best].id};
  if (max_common < cfg.th_L && !any_geometric) return {Decision::New, -1};
  return {Decision::Ignored, -1};
}

namespace {

// Unit ray direction in the world through pixel (u, v).
Eigen::Vector3d pixel_ray(const Camera& cam, const Pose& camera_pose, double u, double v) {
  const Eigen::Vector3d d((u - cam.cx) / cam.fx, (v - cam.cy) / cam.fy, 1.0);
  return (camera_pose.rotation() * d).normalized();
}

}  // namespace

std::optional<DualQuadric> init_quadric(const std::vector<ObjectView>& views, const Camera& cam,
                                        std::optional<double> depth_hint, double min_baseline) {
  if (views.empty()) return std::nullopt;
  const ObjectView& first = views.front();
  auto center_px = [](const BBox& b) { return Eigen::Vector2d(0.5 * (b.x_min + b.x_max), 0.5 * (b.y_min + b.y_max)); };

  double baseline = 0.0;
  for (const auto& v : views) {
    baseline = std::max(baseline, (v.camera_pose.translation() - first.camera_pose.translation()).norm());
  }

  std::optional<Eigen::Vector3d> center;
  if (views.size() >= 2 && baseline > min_baseline) {
    // Least-squares point closest to every center ray.
    Eigen::Matrix3d a = Eigen::Matrix3d::Zero();
    Eigen::Vector3d b = Eigen::Vector3d::Zero();
    for (const auto& v : views) {
      const Eigen::Vector2d c = center_px(v.box);
      const Eigen::Vector3d d = pixel_ray(cam, v.camera_pose, c.x(), c.y());
      const Eigen::Matrix3d proj = Eigen::Matrix3d::Identity() - d * d.transpose();
      a += proj;
      b += proj * v.camera_pose.translation();
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(a);
    if (es.eigenvalues()(0) > 1e-9 * es.eigenvalues()(2)) {
      const Eigen::Vector3d x = a.ldlt().solve(b);
      bool in_front = true;
      for (const auto& v : views) in_front = in_front && (v.camera_pose.inverse() * x).z() > 0.0;
      if (in_front) center = x;
    }
  }
  if (!center && depth_hint && *depth_hint > 0.0) {
    const Eigen::Vector2d c = center_px(first.box);
    const Eigen::Vector3d dir_cam((c.x() - cam.cx) / cam.fx, (c.y() - cam.cy) / cam.fy, 1.0);
    center = first.camera_pose * (*depth_hint * dir_cam);
  }
  if (!center) return std::nullopt;

  const double depth = (first.camera_pose.inverse() * *center).z();
  if (!(depth > 0.0)) return std::nullopt;
  const double ax = 0.5 * first.box.width() * depth / cam.fx;
  const double ay = 0.5 * first.box.height() * depth / cam.fy;
  const Eigen::Vector3d axes(ax, ay, 0.5 * (ax + ay));
  if (!(axes.array() > 0.0).all()) return std::nullopt;
  const DualQuadric q = DualQuadric::from_semi_axes(Pose(Eigen::Matrix3d::Identity(), *center), axes);

  for (const auto& v : views) {
    try {
      if (bbox_iou(conic_to_bbox(project_quadric(q, cam, v.camera_pose)), v.box) <= 0.0) return std::nullopt;
    } catch (const BehindCamera&) {
      return std::nullopt;
    } catch (const DegenerateProjection&) {
      return std::nullopt;
    }
  }
  return q;
}

std::vector<int> associate_points_to_plane(const std::vector<std::pair<int, Eigen::Vector3d>>& points,
                                           const std::set<int>& mask, const Plane& plane, double dist_tol) {
  std::vector<int> out;
  for (const auto& [id, x] : points) {
    if (mask.count(id) && std::abs(plane.normal().dot(x) + plane.distance()) < dist_tol) out.push_back(id);
  }
  return out;
}

}  // namespace semslam
