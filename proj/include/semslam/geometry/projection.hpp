#pragma once

#include <Eigen/Core>

#include "semslam/geometry/bbox.hpp"
#include "semslam/geometry/camera.hpp"
#include "semslam/geometry/pose.hpp"
#include "semslam/geometry/quadric.hpp"

namespace semslam {

/// 3x4 projection K [I | 0] T_cw for a camera with pose T_w^c.
Eigen::Matrix<double, 3, 4> projection_matrix(const Camera& cam, const Pose& camera_pose);

/// Dual conic C* = P Q* P^T of the quadric seen from `camera_pose` (T_w^c),
/// scaled so C*(2,2) = -1.
///
/// Throws BehindCamera if the quadric center has non-positive depth and
/// DegenerateProjection if the camera is inside the ellipsoid or the outline
/// is not a real ellipse.
Eigen::Matrix3d project_quadric(const DualQuadric& q, const Camera& cam, const Pose& camera_pose);

/// Tight axis-aligned box around the ellipse of a dual conic. Each edge is a
/// tangent line l with l^T C* l = 0. Throws DegenerateProjection for
/// hyperbolic or degenerate conics.
BBox conic_to_bbox(const Eigen::Matrix3d& dual_conic);

/// Pixel projection of a world point; throws BehindCamera for depth <= 0.
Eigen::Vector2d project_point(const Eigen::Vector3d& x_world, const Camera& cam, const Pose& camera_pose);

}  // namespace semslam
