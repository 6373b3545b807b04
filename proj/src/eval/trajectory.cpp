#include <cmath>
#include <stdexcept>

#include <Eigen/Geometry>
#include <Eigen/SVD>
#include <json.hpp>

#include "semslam/errors.hpp"
#include "semslam/eval/trajectory.hpp"

namespace semslam {

Trajectory::Trajectory(std::vector<std::pair<int, Pose>> entries) : entries_(std::move(entries)) {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (i > 0 && entries_[i].first <= entries_[i - 1].first)
      throw std::invalid_argument("trajectory: frame ids must be strictly increasing");
    if (!entries_[i].second.is_valid(1e-6)) throw std::invalid_argument("trajectory: invalid pose");
  }
}

namespace {

// Positions of frames present in both, as 3 x n matrices.
std::pair<Eigen::Matrix3Xd, Eigen::Matrix3Xd> common_positions(const Trajectory& est, const Trajectory& gt) {
  std::vector<Eigen::Vector3d> a, b;
  std::size_t j = 0;
  for (const auto& [id, pose] : est.entries()) {
    while (j < gt.size() && gt.entries()[j].first < id) ++j;
    if (j < gt.size() && gt.entries()[j].first == id) {
      a.push_back(pose.translation());
      b.push_back(gt.entries()[j].second.translation());
    }
  }
  Eigen::Matrix3Xd pa(3, a.size()), pb(3, b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    pa.col(i) = a[i];
    pb.col(i) = b[i];
  }
  return {pa, pb};
}

void check_alignable(const Eigen::Matrix3Xd& p) {
  if (p.cols() < 3) throw AlignmentDegenerate("need at least 3 common frames");
  const Eigen::Matrix3Xd centered = p.colwise() - p.rowwise().mean();
  const Eigen::Vector3d sv = Eigen::JacobiSVD<Eigen::Matrix3Xd>(centered).singularValues();
  if (sv(0) <= 0.0 || sv(1) <= 1e-9 * sv(0)) throw AlignmentDegenerate("positions are collinear");
}

}  // namespace

Similarity horn_align(const Trajectory& est, const Trajectory& gt) {
  const auto [pe, pg] = common_positions(est, gt);
  check_alignable(pe);
  check_alignable(pg);
  // Identical positions: the identity is exact, skip the rounding of the SVD.
  if (pe == pg) return Similarity{};
  const Eigen::Matrix4d t = Eigen::umeyama(pe, pg, true);
  Similarity s;
  const Eigen::Matrix3d sr = t.topLeftCorner<3, 3>();
  s.scale = std::cbrt(sr.determinant());
  s.pose = normalized(Pose(sr / s.scale, t.topRightCorner<3, 1>()));
  return s;
}

double position_rmse(const Trajectory& est, const Trajectory& gt, const Similarity& align) {
  const auto [pe, pg] = common_positions(est, gt);
  if (pe.cols() == 0) throw AlignmentDegenerate("no common frames");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < pe.cols(); ++i) sum += (align * Eigen::Vector3d(pe.col(i)) - pg.col(i)).squaredNorm();
  return std::sqrt(sum / static_cast<double>(pe.cols()));
}

double ate_rmse(const Trajectory& est, const Trajectory& gt) { return position_rmse(est, gt, horn_align(est, gt)); }

double scale_error(const Trajectory& est, const Trajectory& gt) {
  return std::abs(1.0 / horn_align(est, gt).scale - 1.0);
}

std::string to_json_line(const EvalRecord& r) {
  nlohmann::json j = {
      {"mode", r.mode}, {"ate_rmse_cm", r.ate_rmse_cm}, {"n_keyframes", r.n_keyframes}, {"seed", r.seed}};
  return j.dump();
}

}  // namespace semslam
