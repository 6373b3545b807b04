#pragma once

#include <string>
#include <utility>
#include <vector>

#include "semslam/geometry/ellipsoid.hpp"
#include "semslam/geometry/pose.hpp"

namespace semslam {

/// (frame_id, pose) pairs with strictly increasing ids.
class Trajectory {
 public:
  Trajectory() = default;
  /// Throws std::invalid_argument on unsorted ids or invalid poses.
  explicit Trajectory(std::vector<std::pair<int, Pose>> entries);

  const std::vector<std::pair<int, Pose>>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

 private:
  std::vector<std::pair<int, Pose>> entries_;
};

/// Least-squares similarity with s R p_est + t ~ p_gt over the common frame
/// ids. Throws AlignmentDegenerate for fewer than 3 common frames or
/// collinear positions.
Similarity horn_align(const Trajectory& est, const Trajectory& gt);

/// Position RMSE after applying `align` to est, over common frame ids.
double position_rmse(const Trajectory& est, const Trajectory& gt, const Similarity& align);

/// ATE RMSE in meters after horn_align.
double ate_rmse(const Trajectory& est, const Trajectory& gt);

/// |1/s - 1| for the aligning scale s: relative size error of the estimate.
double scale_error(const Trajectory& est, const Trajectory& gt);

struct EvalRecord {
  std::string mode;
  double ate_rmse_cm = 0.0;
  int n_keyframes = 0;
  unsigned long long seed = 0;
};

/// One-line JSON form of the record.
std::string to_json_line(const EvalRecord& r);

}  // namespace semslam
