#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <map>
#include <mutex>
#include <stdexcept>
#include <thread>

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include "semslam/errors.hpp"
#include "semslam/graph/optimizer.hpp"

namespace semslam {

std::string to_string(OptimizerStatus status) {
  switch (status) {
    case OptimizerStatus::Converged: return "converged";
    case OptimizerStatus::MaxIterations: return "max_iterations";
    case OptimizerStatus::NumericalFailure: return "numerical_failure";
  }
  return "unknown";
}

void check_config(const OptimizerConfig& cfg) {
  if (cfg.max_iterations <= 0 || !(cfg.lambda_init > 0.0) || !(cfg.lambda_scale > 1.0) ||
      !(cfg.lambda_max > cfg.lambda_init) || !(cfg.abs_tol > 0.0) || !(cfg.rel_tol > 0.0) || cfg.max_threads < 0) {
    throw std::invalid_argument("optimizer config: controls must be positive (lambda_scale > 1)");
  }
}

int worker_count(const OptimizerConfig& cfg) {
  if (!cfg.parallel_eval) return 1;
  int n = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  if (const char* env = std::getenv("SEMSLAM_THREADS")) {
    const int cap = std::atoi(env);
    if (cap > 0) n = std::min(n, cap);
  }
  if (cfg.max_threads > 0) n = std::min(n, cfg.max_threads);
  return n;
}

namespace {

// Runs fn(i) for i in [0, n) over contiguous chunks. Each index writes only
// its own output slot, so results do not depend on the worker count.
template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn&& fn) {
  if (workers <= 1 || n < 64) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const std::size_t w = std::min<std::size_t>(workers, n);
  const std::size_t chunk = (n + w - 1) / w;
  std::vector<std::thread> threads;
  std::exception_ptr error;
  std::mutex error_mutex;
  for (std::size_t t = 0; t < w; ++t) {
    threads.emplace_back([&, t] {
      try {
        for (std::size_t i = t * chunk; i < std::min(n, (t + 1) * chunk); ++i) fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& th : threads) th.join();
  if (error) std::rethrow_exception(error);
}

struct Problem {
  std::vector<VariableId> ids;
  std::vector<Value> values;
  std::vector<int> offset;  // -1 for fixed
  int dim = 0;
  // Per factor, per slot: index into values.
  std::vector<std::vector<int>> slots;
};

Problem build_problem(const FactorGraph& graph) {
  Problem p;
  std::map<VariableId, int> position;
  for (const auto& [id, value] : graph.values()) {
    position[id] = static_cast<int>(p.ids.size());
    p.ids.push_back(id);
    p.values.push_back(value);
    if (graph.is_fixed(id)) {
      p.offset.push_back(-1);
    } else {
      p.offset.push_back(p.dim);
      p.dim += tangent_dim(id.kind);
    }
  }
  for (const Factor& f : graph.factors()) {
    std::vector<int> s;
    for (const VariableId& id : f.vars) s.push_back(position.at(id));
    p.slots.push_back(std::move(s));
  }
  return p;
}

std::vector<const Value*> refs_for(const std::vector<Value>& values, const std::vector<int>& slots) {
  std::vector<const Value*> refs;
  refs.reserve(slots.size());
  for (int s : slots) refs.push_back(&values[s]);
  return refs;
}

struct Evaluation {
  std::vector<FactorCost> costs;
  double total = 0.0;
};

Evaluation evaluate_all(const FactorGraph& graph, const Problem& p, const std::vector<Value>& values, int workers) {
  const auto& factors = graph.factors();
  Evaluation e;
  e.costs.resize(factors.size());
  parallel_for(factors.size(), workers, [&](std::size_t i) {
    e.costs[i] = factor_cost(factors[i], refs_for(values, p.slots[i]));
  });
  for (const FactorCost& c : e.costs) e.total += c.cost;
  return e;
}

struct LinearSystem {
  Eigen::SparseMatrix<double> h;
  Eigen::VectorXd g;
  double cost = 0.0;
  std::vector<FactorStatus> status;
  int undefined = 0;
  int plateau = 0;
};

LinearSystem linearize_all(const FactorGraph& graph, const Problem& p, int workers) {
  const auto& factors = graph.factors();
  std::vector<Linearization> lins(factors.size());
  parallel_for(factors.size(), workers, [&](std::size_t i) {
    lins[i] = linearize(factors[i], refs_for(p.values, p.slots[i]));
  });

  LinearSystem sys;
  sys.g = Eigen::VectorXd::Zero(p.dim);
  sys.status.resize(factors.size());
  std::vector<Eigen::Triplet<double>> triplets;
  for (std::size_t i = 0; i < factors.size(); ++i) {
    const Factor& f = factors[i];
    const Linearization& lin = lins[i];
    sys.status[i] = lin.status;
    if (lin.status == FactorStatus::Undefined) {
      ++sys.undefined;
      continue;
    }
    const Eigen::VectorXd rw = f.noise.whiten(lin.residual);
    const double s = rw.squaredNorm();
    sys.cost += robust_cost(s, f.loss);
    if (lin.status == FactorStatus::Plateau) {
      ++sys.plateau;
      continue;
    }
    const double w = f.loss ? f.loss->weight(s) : 1.0;
    std::vector<Eigen::MatrixXd> jw(lin.jacobians.size());
    for (std::size_t a = 0; a < jw.size(); ++a) jw[a] = f.noise.whiten(lin.jacobians[a]);
    for (std::size_t a = 0; a < jw.size(); ++a) {
      const int oa = p.offset[p.slots[i][a]];
      if (oa < 0) continue;
      sys.g.segment(oa, jw[a].cols()) += w * jw[a].transpose() * rw;
      for (std::size_t b = 0; b < jw.size(); ++b) {
        const int ob = p.offset[p.slots[i][b]];
        if (ob < 0) continue;
        const Eigen::MatrixXd block = w * jw[a].transpose() * jw[b];
        for (int r = 0; r < block.rows(); ++r) {
          for (int c = 0; c < block.cols(); ++c) {
            if (block(r, c) != 0.0) triplets.emplace_back(oa + r, ob + c, block(r, c));
          }
        }
      }
    }
  }
  sys.h.resize(p.dim, p.dim);
  sys.h.setFromTriplets(triplets.begin(), triplets.end());
  // Every free coordinate gets a diagonal entry so damping reaches it.
  for (int k = 0; k < p.dim; ++k) sys.h.coeffRef(k, k) += 0.0;
  sys.h.makeCompressed();
  return sys;
}

}  // namespace

OptimizeReport optimize(FactorGraph& graph, const OptimizerConfig& cfg) {
  check_config(cfg);
  bool gauge = false;
  for (const VariableId& id : graph.fixed()) gauge = gauge || id.kind == VarKind::Pose;
  if (!gauge) throw std::invalid_argument("optimize: no fixed pose");

  const int workers = worker_count(cfg);
  Problem p = build_problem(graph);

  OptimizeReport report;
  double lambda = cfg.lambda_init;
  LinearSystem sys = linearize_all(graph, p, workers);
  report.initial_cost = sys.cost;
  report.cost_history.push_back(sys.cost);
  report.status = OptimizerStatus::MaxIterations;

  auto write_back = [&] {
    for (std::size_t k = 0; k < p.ids.size(); ++k) {
      if (p.offset[k] >= 0) graph.set_value(p.ids[k], p.values[k]);
    }
  };

  if (sys.cost <= cfg.abs_tol || p.dim == 0) report.status = OptimizerStatus::Converged;

  while (report.status == OptimizerStatus::MaxIterations && report.iterations < cfg.max_iterations) {
    ++report.iterations;
    bool accepted = false;
    bool factor_failed = false;
    double new_cost = sys.cost;
    while (!accepted) {
      if (lambda > cfg.lambda_max) break;
      Eigen::SparseMatrix<double> damped = sys.h;
      for (int k = 0; k < p.dim; ++k) {
        const double d = std::clamp(sys.h.coeff(k, k), 1e-6, 1e32);
        damped.coeffRef(k, k) += lambda * d;
      }
      Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(damped);
      Eigen::VectorXd delta;
      if (solver.info() == Eigen::Success) delta = solver.solve(-sys.g);
      if (solver.info() != Eigen::Success || !delta.allFinite()) {
        factor_failed = true;
        lambda *= cfg.lambda_scale;
        continue;
      }
      factor_failed = false;

      std::vector<Value> trial = p.values;
      bool ok = true;
      try {
        for (std::size_t k = 0; k < p.ids.size(); ++k) {
          const int o = p.offset[k];
          if (o < 0) continue;
          trial[k] = retract(p.values[k], delta.segment(o, tangent_dim(p.ids[k].kind)));
          ok = ok && is_valid(trial[k]);
        }
      } catch (const std::invalid_argument&) {
        ok = false;
      }
      Evaluation e;
      if (ok) {
        e = evaluate_all(graph, p, trial, workers);
        for (std::size_t i = 0; i < e.costs.size() && ok; ++i) {
          ok = !(sys.status[i] != FactorStatus::Undefined && e.costs[i].status == FactorStatus::Undefined);
          if (cfg.keep_active) ok = ok && !(sys.status[i] == FactorStatus::Active && e.costs[i].status == FactorStatus::Plateau);
        }
        ok = ok && std::isfinite(e.total);
      }
      if (ok && e.total <= sys.cost) {
        accepted = true;
        new_cost = e.total;
        p.values = std::move(trial);
        lambda = std::max(lambda / cfg.lambda_scale, 1e-12);
      } else {
        lambda *= cfg.lambda_scale;
      }
    }

    if (!accepted) {
      // No damping produced a decrease: a local minimum at this precision,
      // unless the linear system itself could not be solved.
      report.status = factor_failed ? OptimizerStatus::NumericalFailure : OptimizerStatus::Converged;
      break;
    }
    const double old_cost = sys.cost;
    report.cost_history.push_back(new_cost);
    sys = linearize_all(graph, p, workers);
    if (new_cost <= cfg.abs_tol || old_cost - new_cost <= cfg.rel_tol * old_cost) {
      report.status = OptimizerStatus::Converged;
    }
  }

  write_back();
  report.final_cost = sys.cost;
  report.undefined_factors = sys.undefined;
  report.plateau_factors = sys.plateau;
  return report;
}

}  // namespace semslam
