#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "semslam/geometry/cuboid.hpp"

namespace semslam {

namespace {

using Polygon = std::vector<Eigen::Vector3d>;
using Polyhedron = std::vector<Polygon>;

// Faces wound counter-clockwise when seen from outside.
Polyhedron box_polyhedron(const Cuboid& c) {
  std::array<Eigen::Vector3d, 8> v;
  for (int i = 0; i < 8; ++i) {
    const Eigen::Vector3d s((i & 1) ? 1.0 : -1.0, (i & 2) ? 1.0 : -1.0, (i & 4) ? 1.0 : -1.0);
    v[i] = c.center + c.rotation * s.cwiseProduct(c.half_extents);
  }
  return {
      {v[0], v[2], v[3], v[1]},  // -z
      {v[4], v[5], v[7], v[6]},  // +z
      {v[0], v[1], v[5], v[4]},  // -y
      {v[2], v[6], v[7], v[3]},  // +y
      {v[0], v[4], v[6], v[2]},  // -x
      {v[1], v[3], v[7], v[5]},  // +x
  };
}

// Keeps the part with n.x <= h.
Polyhedron clip(const Polyhedron& poly, const Eigen::Vector3d& n, double h) {
  constexpr double kEps = 1e-12;
  Polyhedron out;
  Polygon cap;
  for (const Polygon& face : poly) {
    Polygon kept;
    for (std::size_t i = 0; i < face.size(); ++i) {
      const Eigen::Vector3d& a = face[i];
      const Eigen::Vector3d& b = face[(i + 1) % face.size()];
      const double da = n.dot(a) - h;
      const double db = n.dot(b) - h;
      if (da <= kEps) kept.push_back(a);
      if ((da < -kEps && db > kEps) || (da > kEps && db < -kEps)) {
        const Eigen::Vector3d x = a + (da / (da - db)) * (b - a);
        kept.push_back(x);
        cap.push_back(x);
      } else if (std::abs(da) <= kEps) {
        cap.push_back(a);
      }
    }
    if (kept.size() >= 3) out.push_back(std::move(kept));
  }
  if (cap.size() >= 3) {
    Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
    for (const auto& p : cap) centroid += p;
    centroid /= static_cast<double>(cap.size());
    const Eigen::Vector3d u = (cap.front() - centroid).norm() > kEps
                                  ? (cap.front() - centroid).normalized()
                                  : n.unitOrthogonal();
    const Eigen::Vector3d w = n.cross(u);
    std::sort(cap.begin(), cap.end(), [&](const Eigen::Vector3d& p, const Eigen::Vector3d& q) {
      return std::atan2((p - centroid).dot(w), (p - centroid).dot(u)) <
             std::atan2((q - centroid).dot(w), (q - centroid).dot(u));
    });
    Polygon unique;
    for (const auto& p : cap)
      if (unique.empty() || (p - unique.back()).norm() > 1e-10) unique.push_back(p);
    while (unique.size() > 1 && (unique.front() - unique.back()).norm() <= 1e-10) unique.pop_back();
    if (unique.size() >= 3) out.push_back(std::move(unique));
  }
  return out;
}

double volume(const Polyhedron& poly) {
  double v = 0.0;
  for (const Polygon& face : poly) {
    for (std::size_t i = 1; i + 1 < face.size(); ++i) {
      v += face[0].dot(face[i].cross(face[i + 1]));
    }
  }
  return v / 6.0;
}

}  // namespace

bool Cuboid::contains(const Eigen::Vector3d& x, double tol) const {
  const Eigen::Vector3d local = rotation.transpose() * (x - center);
  return (local.cwiseAbs() - half_extents).maxCoeff() <= tol;
}

double cuboid_iou(const Cuboid& a, const Cuboid& b) {
  const double va = a.volume();
  const double vb = b.volume();
  double inter = 0.0;
  const Eigen::Matrix3d rel = a.rotation.transpose() * b.rotation;
  if ((rel - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < 1e-12) {
    const Eigen::Vector3d d = a.rotation.transpose() * (b.center - a.center);
    const Eigen::Vector3d lo = (-a.half_extents).cwiseMax(d - b.half_extents);
    const Eigen::Vector3d hi = a.half_extents.cwiseMin(d + b.half_extents);
    const Eigen::Vector3d ext = (hi - lo).cwiseMax(0.0);
    inter = ext.prod();
  } else {
    // Center on a to keep the divergence-theorem sum well conditioned.
    Cuboid bc = b;
    bc.center -= a.center;
    Polyhedron poly = box_polyhedron(bc);
    for (int axis = 0; axis < 3 && !poly.empty(); ++axis) {
      const Eigen::Vector3d n = a.rotation.col(axis);
      poly = clip(poly, n, a.half_extents(axis));
      if (!poly.empty()) poly = clip(poly, -n, a.half_extents(axis));
    }
    inter = poly.empty() ? 0.0 : std::max(0.0, volume(poly));
  }
  const double uni = va + vb - inter;
  return uni > 0.0 ? std::clamp(inter / uni, 0.0, 1.0) : 0.0;
}

Cuboid quadric_cuboid(const DualQuadric& q) {
  const Eigen::Vector3d axes = q.semi_axes();
  return Cuboid{q.center(), q.frame().rotation(), axes / axes.maxCoeff()};
}

Cuboid model_cuboid(const std::vector<Eigen::Vector3d>& registered_cloud, const DualQuadric& q) {
  Eigen::Vector3d lo = Eigen::Vector3d::Constant(std::numeric_limits<double>::infinity());
  Eigen::Vector3d hi = -lo;
  const Pose to_local = q.frame().inverse();
  for (const auto& x : registered_cloud) {
    const Eigen::Vector3d p = to_local * x;
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const Eigen::Vector3d half = 0.5 * (hi - lo);
  return Cuboid{q.center(), q.frame().rotation(), half / half.maxCoeff()};
}

}  // namespace semslam
