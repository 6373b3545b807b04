#include <algorithm>
#include <limits>
#include <array>
#include <cmath>
#include <numeric>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SVD>

#include "semslam/errors.hpp"
#include "semslam/geometry/ellipsoid.hpp"

namespace semslam {

double Ellipsoid3::volume() const { return 4.0 / 3.0 * M_PI / std::sqrt(shape.determinant()); }

void Ellipsoid3::principal_axes(Eigen::Vector3d& lengths, Eigen::Matrix3d& axes) const {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(0.5 * (shape + shape.transpose()));
  // Smallest eigenvalue of A is the longest axis.
  for (int i = 0; i < 3; ++i) {
    lengths(i) = 1.0 / std::sqrt(es.eigenvalues()(i));
    axes.col(i) = es.eigenvectors().col(i);
  }
}

Ellipsoid3 min_enclosing_ellipsoid(const std::vector<Eigen::Vector3d>& points, const MeeOptions& options) {
  const int n = static_cast<int>(points.size());
  if (n < 4) throw DegenerateInput("enclosing ellipsoid needs at least 4 points");

  Eigen::Matrix<double, 3, Eigen::Dynamic> p(3, n);
  for (int i = 0; i < n; ++i) p.col(i) = points[i];
  const Eigen::Vector3d mean = p.rowwise().mean();
  Eigen::JacobiSVD<Eigen::Matrix<double, 3, Eigen::Dynamic>> svd(p.colwise() - mean);
  const Eigen::Vector3d sv = svd.singularValues();
  if (sv(0) <= 0.0 || sv(2) <= 1e-9 * sv(0)) throw DegenerateInput("points are coplanar or collinear");

  // Work on centered, scaled coordinates for conditioning.
  const double scale = sv(0) / std::sqrt(static_cast<double>(n));
  Eigen::Matrix<double, 4, Eigen::Dynamic> lifted(4, n);
  lifted.topRows<3>() = (p.colwise() - mean) / scale;
  lifted.row(3).setOnes();

  constexpr double d = 3.0;
  Eigen::VectorXd u = Eigen::VectorXd::Constant(n, 1.0 / n);
  for (int iter = 0; iter < options.max_iterations; ++iter) {
    const Eigen::Matrix4d x = lifted * u.asDiagonal() * lifted.transpose();
    const Eigen::Matrix4d x_inv = x.inverse();
    const Eigen::VectorXd m = (lifted.transpose() * x_inv * lifted).diagonal();
    Eigen::Index j = 0;
    const double m_max = m.maxCoeff(&j);
    const double step = (m_max - d - 1.0) / ((d + 1.0) * (m_max - 1.0));
    Eigen::VectorXd next = (1.0 - step) * u;
    next(j) += step;
    const double change = (next - u).norm();
    u = next;
    if (change < options.tolerance) break;
  }

  const Eigen::Matrix<double, 3, Eigen::Dynamic> q = lifted.topRows<3>();
  const Eigen::Vector3d c = q * u;
  const Eigen::Matrix3d cov = q * u.asDiagonal() * q.transpose() - c * c.transpose();
  Eigen::Matrix3d a = cov.inverse() / d;
  a = 0.5 * (a + a.transpose());

  double worst = 0.0;
  for (int i = 0; i < n; ++i) worst = std::max(worst, (q.col(i) - c).dot(a * (q.col(i) - c)));
  if (worst > 1.0) a /= worst;

  Ellipsoid3 out;
  out.center = mean + scale * c;
  out.shape = a / (scale * scale);
  return out;
}

namespace {

// Tied semi-axes (within 1%) may be permuted freely.
std::vector<std::array<int, 3>> admissible_permutations(const Eigen::Vector3d& sorted_lengths) {
  std::vector<std::array<int, 3>> out;
  std::array<int, 3> perm{0, 1, 2};
  do {
    bool ok = true;
    for (int i = 0; i < 3 && ok; ++i) {
      const double a = sorted_lengths(i);
      const double b = sorted_lengths(perm[i]);
      ok = std::abs(a - b) <= 0.01 * std::max(a, b);
    }
    if (ok) out.push_back(perm);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return out;
}

}  // namespace

Registration register_pointcloud(const std::vector<Eigen::Vector3d>& cloud, const DualQuadric& q) {
  const Ellipsoid3 mee = min_enclosing_ellipsoid(cloud, MeeOptions{1e-10, 200000});

  Eigen::Vector3d cloud_len;
  Eigen::Matrix3d cloud_axes;
  mee.principal_axes(cloud_len, cloud_axes);

  // Quadric axes in world, ordered by descending semi-axis.
  const Eigen::Vector3d q_len_raw = q.semi_axes();
  std::array<int, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](int i, int j) { return q_len_raw(i) > q_len_raw(j); });
  Eigen::Vector3d q_len;
  Eigen::Matrix3d q_axes;
  for (int i = 0; i < 3; ++i) {
    q_len(i) = q_len_raw(order[i]);
    q_axes.col(i) = q.frame().rotation().col(order[i]);
  }

  // R maps cloud axis k to quadric axis perm[k]; choose signs and tie
  // permutations to land closest to the identity.
  Eigen::Matrix3d best = Eigen::Matrix3d::Identity();
  double best_trace = -std::numeric_limits<double>::infinity();
  for (const auto& perm : admissible_permutations(cloud_len)) {
    for (int signs = 0; signs < 8; ++signs) {
      Eigen::Matrix3d target;
      for (int k = 0; k < 3; ++k) target.col(k) = ((signs >> k) & 1 ? -1.0 : 1.0) * q_axes.col(perm[k]);
      const Eigen::Matrix3d r = target * cloud_axes.transpose();
      if (r.determinant() < 0.0) continue;
      if (r.trace() > best_trace + 1e-12) {
        best_trace = r.trace();
        best = r;
      }
    }
  }

  Registration out;
  out.transform.scale = q_len.mean() / cloud_len.mean();
  out.transform.pose =
      normalized(Pose(best, q.center() - out.transform.scale * (best * mee.center)));
  out.cloud.reserve(cloud.size());
  for (const auto& x : cloud) out.cloud.push_back(out.transform * x);
  return out;
}

}  // namespace semslam
