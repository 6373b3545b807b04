#pragma once

#include <Eigen/Core>
#include <unsupported/Eigen/AutoDiff>

namespace semslam {

template <typename Scalar>
using Vector2 = Eigen::Matrix<Scalar, 2, 1>;
template <typename Scalar>
using Vector3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Vector4 = Eigen::Matrix<Scalar, 4, 1>;
template <typename Scalar>
using Vector6 = Eigen::Matrix<Scalar, 6, 1>;
template <typename Scalar>
using Vector9 = Eigen::Matrix<Scalar, 9, 1>;
template <typename Scalar>
using Matrix3 = Eigen::Matrix<Scalar, 3, 3>;
template <typename Scalar>
using Matrix4 = Eigen::Matrix<Scalar, 4, 4>;

using Vector6d = Eigen::Matrix<double, 6, 1>;
using Vector9d = Eigen::Matrix<double, 9, 1>;

/// Forward-mode dual number with a fixed-size derivative block. Constants
/// built from a plain double get a zeroed derivative, which keeps mixed
/// double/jet expressions coherent.
template <int N>
using Jet = Eigen::AutoDiffScalar<Eigen::Matrix<double, N, 1>>;

inline double value_of(double x) { return x; }

template <typename Der>
double value_of(const Eigen::AutoDiffScalar<Der>& x) {
  return x.value();
}

}  // namespace semslam
