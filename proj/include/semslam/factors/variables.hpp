#pragma once

#include <compare>
#include <string>
#include <variant>

#include <Eigen/Core>

#include "semslam/geometry/plane.hpp"
#include "semslam/geometry/pose.hpp"
#include "semslam/geometry/quadric.hpp"

namespace semslam {

enum class VarKind { Pose = 0, Point = 1, Plane = 2, Quadric = 3 };

struct VariableId {
  VarKind kind = VarKind::Pose;
  int index = 0;

  auto operator<=>(const VariableId&) const = default;
};

std::string to_string(VarKind kind);

/// Storage type of every graph variable; alternatives follow VarKind order.
using Value = std::variant<Pose, Eigen::Vector3d, Plane, DualQuadric>;

inline VarKind kind_of(const Value& v) { return static_cast<VarKind>(v.index()); }

/// Tangent-space dimension: pose 6, point 3, plane 3, quadric 9.
int tangent_dim(VarKind kind);

/// Manifold update for any variable; delta size must equal tangent_dim.
Value retract(const Value& value, const Eigen::VectorXd& delta);

/// Type invariants (orthonormal rotations, unit plane normals, finite values).
bool is_valid(const Value& value);

}  // namespace semslam
