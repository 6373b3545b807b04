#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "semslam/geometry/pose.hpp"
#include "semslam/scalar.hpp"

namespace semslam {

/// Bounded dual quadric (ellipsoid) held as a rigid frame plus the natural log
/// of its semi-axis lengths. Any finite log vector is a valid ellipsoid, so
/// additive updates of the shape part can never leave the (3,1) signature.
template <typename Scalar>
class DualQuadricT {
 public:
  DualQuadricT() : log_semi_axes_(Vector3<Scalar>::Zero()) {}
  DualQuadricT(const PoseT<Scalar>& frame, const Vector3<Scalar>& log_semi_axes)
      : frame_(frame), log_semi_axes_(log_semi_axes) {}

  static DualQuadricT from_semi_axes(const PoseT<Scalar>& frame, const Vector3<Scalar>& semi_axes) {
    using std::log;
    return DualQuadricT(frame, Vector3<Scalar>(log(semi_axes(0)), log(semi_axes(1)), log(semi_axes(2))));
  }

  const PoseT<Scalar>& frame() const { return frame_; }
  const Vector3<Scalar>& log_semi_axes() const { return log_semi_axes_; }
  Vector3<Scalar> semi_axes() const { return log_semi_axes_.array().exp().matrix(); }
  Vector3<Scalar> center() const { return frame_.translation(); }

  /// Q* = T diag(a^2, b^2, c^2, -1) T^T.
  Matrix4<Scalar> dual_matrix() const {
    const Vector3<Scalar> s = semi_axes();
    Matrix4<Scalar> canonical = Matrix4<Scalar>::Zero();
    canonical(0, 0) = s(0) * s(0);
    canonical(1, 1) = s(1) * s(1);
    canonical(2, 2) = s(2) * s(2);
    canonical(3, 3) = Scalar(-1);
    const Matrix4<Scalar> t = frame_.matrix();
    return t * canonical * t.transpose();
  }

  /// The same ellipsoid expressed after mapping points through `pose`.
  DualQuadricT transformed(const PoseT<Scalar>& pose) const { return DualQuadricT(pose * frame_, log_semi_axes_); }

  template <typename Other>
  DualQuadricT<Other> cast() const {
    return DualQuadricT<Other>(frame_.template cast<Other>(), log_semi_axes_.template cast<Other>());
  }

 private:
  PoseT<Scalar> frame_;
  Vector3<Scalar> log_semi_axes_;
};

using DualQuadric = DualQuadricT<double>;

/// Log semi-axes are clamped to this magnitude so exp() stays finite.
inline constexpr double kMaxLogSemiAxis = 30.0;

/// (T * exp(dT), L + dL) with delta = (se3 part, log-axis part).
template <typename Scalar>
DualQuadricT<Scalar> quadric_retract(const DualQuadricT<Scalar>& q, const Vector9<Scalar>& delta) {
  const Vector6<Scalar> dt = delta.template head<6>();
  Vector3<Scalar> l = q.log_semi_axes() + delta.template tail<3>();
  return DualQuadricT<Scalar>(pose_retract<Scalar>(q.frame(), dt), l);
}

inline DualQuadric quadric_retract(const DualQuadric& q, const Vector9d& delta) {
  if (!delta.allFinite()) throw std::invalid_argument("quadric_retract: non-finite delta");
  Eigen::Vector3d l = q.log_semi_axes() + delta.tail<3>();
  l = l.cwiseMax(-kMaxLogSemiAxis).cwiseMin(kMaxLogSemiAxis);
  return DualQuadric(normalized(pose_retract(q.frame(), Vector6d(delta.head<6>()))), l);
}

inline Eigen::Matrix4d quadric_dual_matrix(const DualQuadric& q) {
  Eigen::Matrix4d m = q.dual_matrix();
  return 0.5 * (m + m.transpose());
}

inline bool is_valid(const DualQuadric& q) {
  return q.frame().is_valid() && q.log_semi_axes().allFinite() &&
         q.log_semi_axes().cwiseAbs().maxCoeff() <= kMaxLogSemiAxis;
}

}  // namespace semslam
