#pragma once

#include <string>
#include <vector>

#include "semslam/graph/graph.hpp"

namespace semslam {

struct OptimizerConfig {
  int max_iterations = 100;
  double lambda_init = 1e-4;
  double lambda_scale = 10.0;
  /// Damping beyond which a step is given up on.
  double lambda_max = 1e16;
  double abs_tol = 1e-10;
  double rel_tol = 1e-8;
  bool parallel_eval = true;
  /// Worker cap; 0 means SEMSLAM_THREADS or the hardware count.
  int max_threads = 0;
  /// Reject steps that push an active factor onto a plateau (a box
  /// observation losing all overlap).
  bool keep_active = false;
};

/// Throws std::invalid_argument unless all controls are positive.
void check_config(const OptimizerConfig& cfg);

enum class OptimizerStatus { Converged, MaxIterations, NumericalFailure };

std::string to_string(OptimizerStatus status);

struct OptimizeReport {
  OptimizerStatus status = OptimizerStatus::Converged;
  int iterations = 0;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  /// Cost after each accepted step, starting with the initial cost.
  std::vector<double> cost_history;
  /// Factors skipped at the final linearization point.
  int undefined_factors = 0;
  int plateau_factors = 0;

  bool converged() const { return status == OptimizerStatus::Converged; }
};

/// Worker count after applying the config cap and SEMSLAM_THREADS.
int worker_count(const OptimizerConfig& cfg);

/// Levenberg-Marquardt over all non-fixed variables. Requires at least one
/// fixed pose. The graph holds the best accepted iterate on return.
OptimizeReport optimize(FactorGraph& graph, const OptimizerConfig& cfg = {});

}  // namespace semslam
