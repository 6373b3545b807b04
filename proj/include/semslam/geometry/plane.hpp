#pragma once

#include <cmath>
#include <stdexcept>

#include "semslam/geometry/pose.hpp"
#include "semslam/scalar.hpp"

namespace semslam {

/// Infinite plane a x + b y + c z + d = 0 with unit normal (a, b, c).
template <typename Scalar>
class PlaneT {
 public:
  PlaneT() : coeffs_(Scalar(0), Scalar(0), Scalar(1), Scalar(0)) {}

  /// Rescales so the normal has unit length.
  explicit PlaneT(const Vector4<Scalar>& coeffs) : coeffs_(coeffs / coeffs.template head<3>().norm()) {}

  const Vector4<Scalar>& coeffs() const { return coeffs_; }
  Vector3<Scalar> normal() const { return coeffs_.template head<3>(); }
  Scalar distance() const { return coeffs_(3); }

  template <typename Other>
  PlaneT<Other> cast() const {
    return PlaneT<Other>(coeffs_.template cast<Other>());
  }

 private:
  Vector4<Scalar> coeffs_;
};

using Plane = PlaneT<double>;

/// Checked construction from raw homogeneous coefficients.
inline Plane make_plane(const Eigen::Vector4d& coeffs) {
  if (!coeffs.allFinite() || coeffs.head<3>().norm() < 1e-12) {
    throw std::invalid_argument("plane: normal part must be finite and nonzero");
  }
  return Plane(coeffs);
}

// Unit 4-vectors are treated as quaternions with vector part (a, b, c) and
// scalar part d. This chart is only used for retraction and residuals.
namespace s3 {

template <typename Scalar>
Vector4<Scalar> multiply(const Vector4<Scalar>& p, const Vector4<Scalar>& q) {
  const Vector3<Scalar> pv = p.template head<3>();
  const Vector3<Scalar> qv = q.template head<3>();
  Vector4<Scalar> out;
  out.template head<3>() = p(3) * qv + q(3) * pv + pv.cross(qv);
  out(3) = p(3) * q(3) - pv.dot(qv);
  return out;
}

template <typename Scalar>
Vector4<Scalar> conjugate(const Vector4<Scalar>& q) {
  return Vector4<Scalar>(-q(0), -q(1), -q(2), q(3));
}

template <typename Scalar>
Vector4<Scalar> exp(const Vector3<Scalar>& delta) {
  using std::cos;
  using std::sin;
  using std::sqrt;
  const Scalar theta2 = delta.squaredNorm();
  Vector4<Scalar> out;
  if (value_of(theta2) < 1e-14) {
    out.template head<3>() = delta;
    out(3) = Scalar(1) - Scalar(0.5) * theta2;
    return out / out.norm();
  }
  const Scalar theta = sqrt(theta2);
  out.template head<3>() = (sin(theta) / theta) * delta;
  out(3) = cos(theta);
  return out;
}

/// Inverse of exp for unit q with q(3) >= 0.
template <typename Scalar>
Vector3<Scalar> log(const Vector4<Scalar>& q) {
  using std::atan2;
  using std::sqrt;
  const Vector3<Scalar> v = q.template head<3>();
  const Scalar v2 = v.squaredNorm();
  if (value_of(v2) < 1e-20) {
    return v / q(3);
  }
  const Scalar vn = sqrt(v2);
  return (atan2(vn, q(3)) / vn) * v;
}

}  // namespace s3

template <typename Scalar>
Vector4<Scalar> unit_coeffs(const PlaneT<Scalar>& plane) {
  return plane.coeffs() / plane.coeffs().norm();
}

/// q <- q * exp(delta) on the unit 3-sphere, then back to unit-normal form.
template <typename Scalar>
PlaneT<Scalar> plane_retract(const PlaneT<Scalar>& plane, const Vector3<Scalar>& delta) {
  return PlaneT<Scalar>(s3::multiply<Scalar>(unit_coeffs(plane), s3::exp<Scalar>(delta)));
}

inline Plane plane_retract(const Plane& plane, const Eigen::Vector3d& delta) {
  if (!delta.allFinite()) throw std::invalid_argument("plane_retract: non-finite delta");
  return plane_retract<double>(plane, delta);
}

/// Image of the plane under the point map x -> T x (inverse-transpose action):
/// n' = R n, d' = d - t^T R n.
template <typename Scalar>
PlaneT<Scalar> transform_plane(const PlaneT<Scalar>& plane, const PoseT<Scalar>& pose) {
  const Vector3<Scalar> n = pose.rotation() * plane.normal();
  Vector4<Scalar> out;
  out.template head<3>() = n;
  out(3) = plane.distance() - pose.translation().dot(n);
  return PlaneT<Scalar>(out);
}

/// Tangent-space difference log(pred^-1 * obs) with antipodal
/// identification: obs is negated if that brings it closer to pred.
template <typename Scalar>
Vector3<Scalar> plane_local(const PlaneT<Scalar>& predicted, const PlaneT<Scalar>& observed) {
  const Vector4<Scalar> p = unit_coeffs(predicted);
  Vector4<Scalar> o = unit_coeffs(observed);
  if (value_of(p.dot(o)) < 0.0) o = -o;
  return s3::log<Scalar>(s3::multiply<Scalar>(s3::conjugate<Scalar>(p), o));
}

}  // namespace semslam
