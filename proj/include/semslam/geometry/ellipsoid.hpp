#pragma once

#include <vector>

#include <Eigen/Core>

#include "semslam/geometry/pose.hpp"
#include "semslam/geometry/quadric.hpp"

namespace semslam {

/// Solid ellipsoid (x - c)^T A (x - c) <= 1.
struct Ellipsoid3 {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  Eigen::Matrix3d shape = Eigen::Matrix3d::Identity();

  double volume() const;
  double mahalanobis2(const Eigen::Vector3d& x) const { return (x - center).dot(shape * (x - center)); }
  /// Semi-axis lengths (descending) and matching unit axes as columns.
  void principal_axes(Eigen::Vector3d& lengths, Eigen::Matrix3d& axes) const;
};

struct MeeOptions {
  double tolerance = 1e-6;
  int max_iterations = 10000;
};

/// Minimum-volume enclosing ellipsoid by Khachiyan's barycentric iteration.
/// The result is rescaled so every input satisfies the containment test.
/// Throws DegenerateInput for fewer than 4 points or a flat cloud.
Ellipsoid3 min_enclosing_ellipsoid(const std::vector<Eigen::Vector3d>& points, const MeeOptions& options = {});

/// x -> scale * R x + t.
struct Similarity {
  double scale = 1.0;
  Pose pose;

  Eigen::Vector3d operator*(const Eigen::Vector3d& x) const {
    return scale * (pose.rotation() * x) + pose.translation();
  }
};

struct Registration {
  Similarity transform;
  std::vector<Eigen::Vector3d> cloud;
};

/// Seven-parameter alignment of a normalized, canonically posed cloud to a
/// quadric: the cloud's enclosing ellipsoid is mapped onto the quadric frame,
/// axes paired by descending length, scale set by the mean semi-axis.
Registration register_pointcloud(const std::vector<Eigen::Vector3d>& cloud, const DualQuadric& q);

}  // namespace semslam
