#include <cmath>

#include <Eigen/Cholesky>

#include "semslam/errors.hpp"
#include "semslam/geometry/projection.hpp"

namespace semslam {

namespace {

// Splits a normalized dual conic into center and the inverse ellipse shape.
// Returns false when the conic is not a real ellipse.
bool ellipse_from_dual_conic(const Eigen::Matrix3d& c, Eigen::Vector2d& center, Eigen::Matrix2d& shape_inv) {
  center = -c.block<2, 1>(0, 2);
  shape_inv = c.topLeftCorner<2, 2>() + center * center.transpose();
  shape_inv = 0.5 * (shape_inv + shape_inv.transpose());
  return shape_inv(0, 0) > 0.0 && shape_inv(1, 1) > 0.0 && shape_inv.determinant() > 0.0;
}

Eigen::Matrix3d normalize_dual_conic(const Eigen::Matrix3d& c) {
  if (!c.allFinite()) throw DegenerateProjection("dual conic has non-finite entries");
  const double scale = c.norm();
  if (std::abs(c(2, 2)) <= 1e-12 * std::max(scale, 1e-300)) {
    throw DegenerateProjection("dual conic (3,3) entry vanishes");
  }
  Eigen::Matrix3d out = -c / c(2, 2);
  return 0.5 * (out + out.transpose());
}

}  // namespace

Eigen::Matrix<double, 3, 4> projection_matrix(const Camera& cam, const Pose& camera_pose) {
  const Pose world_to_camera = camera_pose.inverse();
  Eigen::Matrix<double, 3, 4> rt;
  rt.leftCols<3>() = world_to_camera.rotation();
  rt.col(3) = world_to_camera.translation();
  return cam.K() * rt;
}

Eigen::Matrix3d project_quadric(const DualQuadric& q, const Camera& cam, const Pose& camera_pose) {
  const Pose world_to_camera = camera_pose.inverse();
  const Eigen::Vector3d center_cam = world_to_camera * q.center();
  if (center_cam.z() <= 0.0) throw BehindCamera("quadric center behind camera");

  const Eigen::Vector3d eye_local = q.frame().inverse() * camera_pose.translation();
  if (eye_local.cwiseQuotient(q.semi_axes()).squaredNorm() <= 1.0) {
    throw DegenerateProjection("camera inside ellipsoid");
  }

  const Eigen::Matrix<double, 3, 4> p = projection_matrix(cam, camera_pose);
  const Eigen::Matrix3d c = normalize_dual_conic(p * quadric_dual_matrix(q) * p.transpose());
  Eigen::Vector2d center;
  Eigen::Matrix2d shape_inv;
  if (!ellipse_from_dual_conic(c, center, shape_inv)) {
    throw DegenerateProjection("projected outline is not an ellipse");
  }
  return c;
}

BBox conic_to_bbox(const Eigen::Matrix3d& dual_conic) {
  const Eigen::Matrix3d c = normalize_dual_conic(dual_conic);
  Eigen::Vector2d center;
  Eigen::Matrix2d shape_inv;
  if (!ellipse_from_dual_conic(c, center, shape_inv)) {
    throw DegenerateProjection("conic is not an ellipse");
  }
  // Vertical tangents x = u solve C11 - 2 u C13 + u^2 C33 = 0, i.e.
  // u = center_x +- sqrt(shape_inv(0,0)); likewise for y.
  const double hw = std::sqrt(shape_inv(0, 0));
  const double hh = std::sqrt(shape_inv(1, 1));
  BBox box;
  box.x_min = center.x() - hw;
  box.x_max = center.x() + hw;
  box.y_min = center.y() - hh;
  box.y_max = center.y() + hh;
  return box;
}

Eigen::Vector2d project_point(const Eigen::Vector3d& x_world, const Camera& cam, const Pose& camera_pose) {
  const Eigen::Vector3d xc = camera_pose.inverse() * x_world;
  if (xc.z() <= 0.0) throw BehindCamera("point behind camera");
  return Eigen::Vector2d(cam.fx * xc.x() / xc.z() + cam.cx, cam.fy * xc.y() / xc.z() + cam.cy);
}

}  // namespace semslam
