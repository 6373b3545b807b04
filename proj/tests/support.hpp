#pragma once

#include <cmath>
#include <map>
#include <random>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <Eigen/Geometry>

#include "semslam/geometry/bbox.hpp"
#include "semslam/geometry/cuboid.hpp"
#include "semslam/geometry/ellipsoid.hpp"
#include "semslam/geometry/plane.hpp"
#include "semslam/geometry/pose.hpp"
#include "semslam/geometry/quadric.hpp"
#include "semslam/factors/factor.hpp"
#include "semslam/graph/graph.hpp"
#include "semslam/sim/simulator.hpp"

namespace testing {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

inline Eigen::Vector3d uniform3(Rng& rng, double lo, double hi) {
  return {uniform(rng, lo, hi), uniform(rng, lo, hi), uniform(rng, lo, hi)};
}

inline Eigen::Matrix3d random_rotation(Rng& rng) {
  Eigen::Quaterniond q(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1));
  q.normalize();
  return q.toRotationMatrix();
}

inline semslam::Pose random_pose(Rng& rng, double t = 2.0) {
  return semslam::Pose(random_rotation(rng), uniform3(rng, -t, t));
}

inline semslam::Plane random_plane(Rng& rng) {
  Eigen::Vector3d n = uniform3(rng, -1, 1);
  while (n.norm() < 0.1) n = uniform3(rng, -1, 1);
  n.normalize();
  return semslam::Plane(Eigen::Vector4d(n.x(), n.y(), n.z(), uniform(rng, -2, 2)));
}

inline semslam::DualQuadric random_quadric(Rng& rng, double lo = 0.2, double hi = 1.0) {
  return semslam::DualQuadric::from_semi_axes(random_pose(rng), uniform3(rng, lo, hi));
}

/// Camera pose at `eye` looking at `target` (z forward, y down), built here
/// independently of the simulator helper.
inline semslam::Pose looking_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target) {
  const Eigen::Vector3d z = (target - eye).normalized();
  Eigen::Vector3d up(0, 0, 1);
  if (std::abs(z.dot(up)) > 0.99) up = Eigen::Vector3d(0, 1, 0);
  const Eigen::Vector3d x = z.cross(up).normalized();
  const Eigen::Vector3d y = z.cross(x);
  Eigen::Matrix3d r;
  r.col(0) = x;
  r.col(1) = y;
  r.col(2) = z;
  return semslam::Pose(r, eye);
}

/// Eigenvalue sign counts (positive, negative) of a symmetric matrix.
template <int N>
std::pair<int, int> signature(const Eigen::Matrix<double, N, N>& m, double tol = 1e-12) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, N, N>> es(0.5 * (m + m.transpose()));
  const double scale = es.eigenvalues().cwiseAbs().maxCoeff();
  int pos = 0, neg = 0;
  for (int i = 0; i < N; ++i) {
    if (es.eigenvalues()(i) > tol * scale) ++pos;
    if (es.eigenvalues()(i) < -tol * scale) ++neg;
  }
  return {pos, neg};
}

/// Union area of two boxes by coordinate compression.
double union_area(const semslam::BBox& a, const semslam::BBox& b);

/// Fraction of `n` points drawn uniformly inside `a` that also fall in `b`,
/// turned into an IoU estimate.
inline double monte_carlo_iou(const semslam::Cuboid& a, const semslam::Cuboid& b, int n, Rng& rng) {
  int hits = 0;
  for (int i = 0; i < n; ++i) {
    Eigen::Vector3d u;
    for (int k = 0; k < 3; ++k) u(k) = uniform(rng, -a.half_extents(k), a.half_extents(k));
    const Eigen::Vector3d x = a.center + a.rotation * u;
    const Eigen::Vector3d ub = b.rotation.transpose() * (x - b.center);
    if ((ub.cwiseAbs().array() <= b.half_extents.array()).all()) ++hits;
  }
  const double inter = a.volume() * hits / n;
  return inter / (a.volume() + b.volume() - inter);
}

/// Graph over ground truth with every factor kind the data supports.
/// Poses are keyed by frame id, points by ground-truth index, planes and
/// quadrics by ground-truth index and anchored at their first observer.
struct GtGraph {
  semslam::FactorGraph graph;
  std::map<int, int> plane_anchor;
  std::map<int, int> quadric_anchor;
};

GtGraph build_gt_graph(const semslam::Dataset& ds, const semslam::GroundTruth& gt, bool objects = true);

/// A factor with values for its slots.
struct FactorCase {
  semslam::Factor factor;
  std::vector<semslam::Value> values;

  std::vector<const semslam::Value*> refs() const {
    std::vector<const semslam::Value*> r;
    for (const auto& v : values) r.push_back(&v);
    return r;
  }
};

/// Kinds with exact Jacobians; the plane observation appears in both its
/// ternary and binary forms.
std::vector<std::pair<semslam::FactorKind, int>> smooth_factor_kinds();

/// Random well-posed configuration of a smooth factor kind with `slots` variables.
FactorCase random_factor_case(semslam::FactorKind kind, int slots, Rng& rng);

/// Central differences through retract(), written independently of the
/// library's numeric Jacobian.
std::vector<Eigen::MatrixXd> central_differences(const FactorCase& c, double step = 1e-6);

/// Largest |J_analytic - J_fd|_F / max(|J_analytic|_F, 1) over the slots.
double jacobian_relative_error(const FactorCase& c);

}  // namespace testing
