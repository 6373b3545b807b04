#pragma once

#include <cmath>
#include <stdexcept>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "semslam/scalar.hpp"

namespace semslam {

template <typename Scalar>
Matrix3<Scalar> skew(const Vector3<Scalar>& v) {
  Matrix3<Scalar> m;
  m << Scalar(0), -v.z(), v.y(),  //
      v.z(), Scalar(0), -v.x(),   //
      -v.y(), v.x(), Scalar(0);
  return m;
}

/// Rigid transform x -> R x + t. Camera and keyframe poses map camera-frame
/// points into the world frame (T_w^c).
template <typename Scalar>
class PoseT {
 public:
  PoseT() : rotation_(Matrix3<Scalar>::Identity()), translation_(Vector3<Scalar>::Zero()) {}
  PoseT(const Matrix3<Scalar>& rotation, const Vector3<Scalar>& translation)
      : rotation_(rotation), translation_(translation) {}

  static PoseT Identity() { return PoseT(); }

  const Matrix3<Scalar>& rotation() const { return rotation_; }
  const Vector3<Scalar>& translation() const { return translation_; }

  PoseT inverse() const {
    const Matrix3<Scalar> rt = rotation_.transpose();
    return PoseT(rt, -(rt * translation_));
  }

  PoseT operator*(const PoseT& other) const {
    return PoseT(rotation_ * other.rotation_, rotation_ * other.translation_ + translation_);
  }

  Vector3<Scalar> operator*(const Vector3<Scalar>& x) const { return rotation_ * x + translation_; }

  Matrix4<Scalar> matrix() const {
    Matrix4<Scalar> m = Matrix4<Scalar>::Identity();
    m.template topLeftCorner<3, 3>() = rotation_;
    m.template topRightCorner<3, 1>() = translation_;
    return m;
  }

  template <typename Other>
  PoseT<Other> cast() const {
    return PoseT<Other>(rotation_.template cast<Other>(), translation_.template cast<Other>());
  }

  /// Orthonormality and determinant within tol.
  bool is_valid(double tol = 1e-9) const {
    for (int i = 0; i < 3; ++i) {
      if (!std::isfinite(value_of(translation_(i)))) return false;
      for (int j = 0; j < 3; ++j) {
        double dot = 0.0;
        for (int k = 0; k < 3; ++k) dot += value_of(rotation_(k, i)) * value_of(rotation_(k, j));
        if (std::abs(dot - (i == j ? 1.0 : 0.0)) > tol) return false;
      }
    }
    Matrix3<double> r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) r(i, j) = value_of(rotation_(i, j));
    return std::abs(r.determinant() - 1.0) <= tol;
  }

 private:
  Matrix3<Scalar> rotation_;
  Vector3<Scalar> translation_;
};

using Pose = PoseT<double>;

template <typename Scalar>
Matrix3<Scalar> so3_exp(const Vector3<Scalar>& w) {
  using std::cos;
  using std::sin;
  using std::sqrt;
  const Matrix3<Scalar> W = skew(w);
  const Scalar theta2 = w.squaredNorm();
  if (value_of(theta2) < 1e-12) {
    return Matrix3<Scalar>::Identity() + W + Scalar(0.5) * W * W;
  }
  const Scalar theta = sqrt(theta2);
  return Matrix3<Scalar>::Identity() + (sin(theta) / theta) * W + ((Scalar(1) - cos(theta)) / theta2) * W * W;
}

/// Rotation angle pi has no unique logarithm; the branch with a non-negative
/// first nonzero axis component is returned.
template <typename Scalar>
Vector3<Scalar> so3_log(const Matrix3<Scalar>& r) {
  using std::atan2;
  using std::sqrt;
  const Vector3<Scalar> s(Scalar(0.5) * (r(2, 1) - r(1, 2)), Scalar(0.5) * (r(0, 2) - r(2, 0)),
                          Scalar(0.5) * (r(1, 0) - r(0, 1)));
  const Scalar c = Scalar(0.5) * (r.trace() - Scalar(1));
  const double s2 = value_of(s.squaredNorm());
  if (s2 < 1e-20 && value_of(c) > 0.0) {
    return s;
  }
  if (value_of(c) < -1.0 + 1e-10) {
    // Near pi: recover the axis from the symmetric part R = 2 a a^T - I.
    const Matrix3<Scalar> aat = Scalar(0.5) * (r + Matrix3<Scalar>::Identity());
    int k = 0;
    for (int i = 1; i < 3; ++i)
      if (value_of(aat(i, i)) > value_of(aat(k, k))) k = i;
    Vector3<Scalar> axis = aat.col(k) / sqrt(aat(k, k));
    for (int i = 0; i < 3; ++i) {
      if (std::abs(value_of(axis(i))) > 1e-12) {
        if (value_of(axis(i)) < 0.0) axis = -axis;
        break;
      }
    }
    return Scalar(M_PI) * axis;
  }
  const Scalar sn = sqrt(s.squaredNorm());
  const Scalar theta = atan2(sn, c);
  return (theta / sn) * s;
}

/// SE(3) exponential; delta = (rotation, translation).
template <typename Scalar>
PoseT<Scalar> se3_exp(const Vector6<Scalar>& delta) {
  using std::cos;
  using std::sin;
  using std::sqrt;
  const Vector3<Scalar> w = delta.template head<3>();
  const Vector3<Scalar> v = delta.template tail<3>();
  const Matrix3<Scalar> W = skew(w);
  const Scalar theta2 = w.squaredNorm();
  Matrix3<Scalar> V;
  if (value_of(theta2) < 1e-12) {
    V = Matrix3<Scalar>::Identity() + Scalar(0.5) * W + Scalar(1.0 / 6.0) * W * W;
  } else {
    const Scalar theta = sqrt(theta2);
    V = Matrix3<Scalar>::Identity() + ((Scalar(1) - cos(theta)) / theta2) * W +
        ((theta - sin(theta)) / (theta2 * theta)) * W * W;
  }
  return PoseT<Scalar>(so3_exp(w), V * v);
}

template <typename Scalar>
Vector6<Scalar> se3_log(const PoseT<Scalar>& pose) {
  using std::cos;
  using std::sin;
  using std::sqrt;
  const Vector3<Scalar> w = so3_log(pose.rotation());
  const Matrix3<Scalar> W = skew(w);
  const Scalar theta2 = w.squaredNorm();
  Matrix3<Scalar> v_inv;
  if (value_of(theta2) < 1e-12) {
    v_inv = Matrix3<Scalar>::Identity() - Scalar(0.5) * W + Scalar(1.0 / 12.0) * W * W;
  } else {
    const Scalar theta = sqrt(theta2);
    const Scalar coef = (Scalar(1) - (theta * sin(theta)) / (Scalar(2) * (Scalar(1) - cos(theta)))) / theta2;
    v_inv = Matrix3<Scalar>::Identity() - Scalar(0.5) * W + coef * W * W;
  }
  Vector6<Scalar> out;
  out << w, v_inv * pose.translation();
  return out;
}

/// P * exp(delta). Works for any scalar pair so that a double pose can be
/// perturbed by a jet delta.
template <typename Scalar>
PoseT<Scalar> pose_retract(const PoseT<Scalar>& pose, const Vector6<Scalar>& delta) {
  return pose * se3_exp(delta);
}

inline Pose pose_retract(const Pose& pose, const Vector6d& delta) {
  if (!delta.allFinite()) throw std::invalid_argument("pose_retract: non-finite delta");
  return pose * se3_exp<double>(delta);
}

inline Vector6d pose_log(const Pose& pose) { return se3_log<double>(pose); }

/// Re-orthonormalizes accumulated rounding in a rotation.
inline Pose normalized(const Pose& pose) {
  Eigen::Quaterniond q(pose.rotation());
  q.normalize();
  return Pose(q.toRotationMatrix(), pose.translation());
}

}  // namespace semslam
