#pragma once

#include <vector>

#include <Eigen/Core>

#include "semslam/geometry/quadric.hpp"

namespace semslam {

/// Oriented box: points center + R u with |u_i| <= half_extents_i.
struct Cuboid {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d half_extents = Eigen::Vector3d::Ones();

  double volume() const { return 8.0 * half_extents.prod(); }
  bool contains(const Eigen::Vector3d& x, double tol = 0.0) const;
};

/// Volume intersection-over-union. Boxes sharing an orientation take a
/// closed-form path; otherwise the intersection polytope is clipped exactly.
double cuboid_iou(const Cuboid& a, const Cuboid& b);

/// Enclosing box of the ellipsoid in its own frame, scaled so the largest
/// half-extent is 1.
Cuboid quadric_cuboid(const DualQuadric& q);

/// Normalized enclosing box of a registered model cloud, measured along the
/// quadric's axes and re-centered on the quadric.
Cuboid model_cuboid(const std::vector<Eigen::Vector3d>& registered_cloud, const DualQuadric& q);

}  // namespace semslam
