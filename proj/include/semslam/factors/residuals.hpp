#pragma once

// Residual functions for every constraint kind. The smooth ones are templated
// on the scalar so they can be evaluated on jets for exact Jacobians.

#include <Eigen/Core>

#include "semslam/geometry/bbox.hpp"
#include "semslam/geometry/camera.hpp"
#include "semslam/geometry/cuboid.hpp"
#include "semslam/geometry/plane.hpp"
#include "semslam/geometry/pose.hpp"
#include "semslam/geometry/quadric.hpp"

namespace semslam {

/// Pixel error of a world point seen from T_w^c. Throws BehindCamera.
Eigen::Vector2d point_reprojection(const Eigen::Vector3d& x, const Pose& camera_pose, const Camera& cam,
                                   const Eigen::Vector2d& pixel);

/// Signed point-plane distance a x + b y + c z + d.
template <typename Scalar>
Scalar point_plane(const Vector3<Scalar>& x, const PlaneT<Scalar>& plane) {
  return plane.normal().dot(x) + plane.distance();
}

/// |n1 . n2| - 1; zero for parallel or anti-parallel normals.
template <typename Scalar>
Scalar plane_parallel(const PlaneT<Scalar>& a, const PlaneT<Scalar>& b) {
  using std::abs;
  return abs(a.normal().dot(b.normal())) - Scalar(1);
}

/// n1 . n2; zero for perpendicular normals.
template <typename Scalar>
Scalar plane_perpendicular(const PlaneT<Scalar>& a, const PlaneT<Scalar>& b) {
  return a.normal().dot(b.normal());
}

/// pi^T (Q* / |Q*|_F) pi; zero when the plane touches the ellipsoid.
template <typename Scalar>
Scalar tangency(const PlaneT<Scalar>& plane, const DualQuadricT<Scalar>& q) {
  const Matrix4<Scalar> m = q.dual_matrix();
  const Vector4<Scalar>& pi = plane.coeffs();
  return pi.dot(m * pi) / m.norm();
}

/// Relative pose from reference keyframe coordinates to camera coordinates,
/// (T_w^c)^-1 T_w^r.
template <typename Scalar>
PoseT<Scalar> reference_to_camera(const PoseT<Scalar>& ref_pose, const PoseT<Scalar>& camera_pose) {
  return camera_pose.inverse() * ref_pose;
}

/// Tangent-space difference between the predicted camera-frame plane and the
/// observed one (antipodal sign resolved).
template <typename Scalar>
Vector3<Scalar> plane_observation(const PlaneT<Scalar>& plane_ref, const PoseT<Scalar>& ref_pose,
                                  const PoseT<Scalar>& camera_pose, const PlaneT<Scalar>& observed) {
  const PlaneT<Scalar> predicted = transform_plane(plane_ref, reference_to_camera(ref_pose, camera_pose));
  return plane_local(predicted, observed);
}

/// log(Z^-1 T_i^-1 T_j) for a measured relative pose Z.
template <typename Scalar>
Vector6<Scalar> pose_between(const PoseT<Scalar>& pose_i, const PoseT<Scalar>& pose_j,
                             const PoseT<Scalar>& measured) {
  return se3_log(measured.inverse() * (pose_i.inverse() * pose_j));
}

/// Predicted detection box of a quadric held relative to a reference keyframe.
/// Throws BehindCamera or DegenerateProjection.
BBox predicted_bbox(const DualQuadric& quadric_ref, const Pose& ref_pose, const Pose& camera_pose, const Camera& cam);

/// 1 - IoU between the predicted box and the detection.
double quadric_observation(const DualQuadric& quadric_ref, const Pose& ref_pose, const Pose& camera_pose,
                           const Camera& cam, const BBox& observed);

/// 1 - IoU of the normalized enclosing boxes; depends only on axis ratios.
double shape_prior(const DualQuadric& q, const Cuboid& model);

}  // namespace semslam
