#include <cmath>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include "semslam/factors/noise.hpp"

namespace semslam {

NoiseModel NoiseModel::isotropic(int dim, double sigma) {
  if (dim <= 0 || !(sigma > 0.0) || !std::isfinite(sigma)) {
    throw std::invalid_argument("noise: sigma must be positive and finite");
  }
  return NoiseModel(Kind::Isotropic, Eigen::MatrixXd::Identity(dim, dim) / sigma);
}

NoiseModel NoiseModel::diagonal(const Eigen::VectorXd& sigmas) {
  if (sigmas.size() == 0 || !sigmas.allFinite() || (sigmas.array() <= 0.0).any()) {
    throw std::invalid_argument("noise: sigmas must be positive and finite");
  }
  return NoiseModel(Kind::Diagonal, sigmas.cwiseInverse().asDiagonal().toDenseMatrix());
}

NoiseModel NoiseModel::covariance(const Eigen::MatrixXd& cov) {
  if (cov.rows() != cov.cols() || cov.rows() == 0 || !cov.allFinite() ||
      (cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-12 * cov.cwiseAbs().maxCoeff()) {
    throw std::invalid_argument("noise: covariance must be square and symmetric");
  }
  const Eigen::MatrixXd info = cov.inverse();
  Eigen::LLT<Eigen::MatrixXd> llt(0.5 * (info + info.transpose()));
  if (llt.info() != Eigen::Success) throw std::invalid_argument("noise: covariance must be positive definite");
  // info = L L^T, so whitening by L^T gives r^T info r.
  return NoiseModel(Kind::Covariance, llt.matrixL().transpose());
}

double Huber::cost(double s) const {
  const double w2 = width * width;
  return s <= w2 ? s : 2.0 * width * std::sqrt(s) - w2;
}

double Huber::weight(double s) const { return s <= width * width ? 1.0 : width / std::sqrt(s); }

double robust_cost(double mahalanobis2, const std::optional<Huber>& loss) {
  return loss ? loss->cost(mahalanobis2) : mahalanobis2;
}

}  // namespace semslam
