#pragma once

#include <optional>

#include <Eigen/Core>

namespace semslam {

/// Gaussian measurement noise. The optimizer consumes the whitened residual
/// L r, where L^T L is the information matrix, so that |L r|^2 = r^T S^-1 r.
class NoiseModel {
 public:
  enum class Kind { Isotropic, Diagonal, Covariance };

  static NoiseModel isotropic(int dim, double sigma);
  static NoiseModel diagonal(const Eigen::VectorXd& sigmas);
  static NoiseModel covariance(const Eigen::MatrixXd& cov);

  Kind kind() const { return kind_; }
  int dim() const { return static_cast<int>(sqrt_info_.rows()); }
  const Eigen::MatrixXd& sqrt_information() const { return sqrt_info_; }

  Eigen::VectorXd whiten(const Eigen::VectorXd& r) const { return sqrt_info_ * r; }
  Eigen::MatrixXd whiten(const Eigen::MatrixXd& j) const { return sqrt_info_ * j; }
  double mahalanobis2(const Eigen::VectorXd& r) const { return whiten(r).squaredNorm(); }

 private:
  NoiseModel(Kind kind, Eigen::MatrixXd sqrt_info) : kind_(kind), sqrt_info_(std::move(sqrt_info)) {}

  Kind kind_;
  Eigen::MatrixXd sqrt_info_;
};

/// Huber loss on the squared whitened norm s: s below width^2, then
/// 2 width sqrt(s) - width^2.
struct Huber {
  double width = 1.5;

  double cost(double s) const;
  /// IRLS weight d cost / d s.
  double weight(double s) const;
};

/// Robust-weighted squared Mahalanobis cost.
double robust_cost(double mahalanobis2, const std::optional<Huber>& loss);

}  // namespace semslam
