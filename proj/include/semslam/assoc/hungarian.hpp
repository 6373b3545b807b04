#pragma once

#include <vector>

#include <Eigen/Core>

namespace semslam {

/// Minimum-cost assignment for a rectangular cost matrix. Returns, for each
/// row, the assigned column or -1 when there are more rows than columns.
/// Costs must be finite.
std::vector<int> hungarian(const Eigen::MatrixXd& cost);

/// Sum of cost(i, assignment[i]) over assigned rows.
double assignment_cost(const Eigen::MatrixXd& cost, const std::vector<int>& assignment);

}  // namespace semslam
