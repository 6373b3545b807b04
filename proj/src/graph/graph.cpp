#include <stdexcept>

#include "semslam/errors.hpp"
#include "semslam/graph/graph.hpp"

namespace semslam {

namespace {

Value canonical(const Value& value) {
  if (kind_of(value) == VarKind::Plane) return Plane(std::get<Plane>(value).coeffs());
  return value;
}

}  // namespace

VariableId FactorGraph::add_variable(const Value& value) {
  const VarKind kind = kind_of(value);
  return add_variable(VariableId{kind, next_index_[static_cast<int>(kind)]}, value);
}

VariableId FactorGraph::add_variable(VariableId id, const Value& value) {
  if (id.kind != kind_of(value)) throw std::invalid_argument("add_variable: id kind does not match value");
  if (id.index < 0) throw std::invalid_argument("add_variable: negative index");
  if (contains(id)) throw std::invalid_argument("add_variable: duplicate id");
  const Value v = canonical(value);
  if (!is_valid(v)) throw std::invalid_argument("add_variable: invalid " + to_string(id.kind));
  values_.emplace(id, v);
  int& next = next_index_[static_cast<int>(id.kind)];
  next = std::max(next, id.index + 1);
  return id;
}

const Value& FactorGraph::value(VariableId id) const {
  const auto it = values_.find(id);
  if (it == values_.end()) throw std::invalid_argument("unknown variable " + to_string(id.kind));
  return it->second;
}

void FactorGraph::set_value(VariableId id, const Value& value) {
  auto it = values_.find(id);
  if (it == values_.end()) throw std::invalid_argument("set_value: unknown variable");
  if (kind_of(value) != id.kind) throw std::invalid_argument("set_value: kind mismatch");
  const Value v = canonical(value);
  if (!is_valid(v)) throw std::invalid_argument("set_value: invalid value");
  it->second = v;
}

std::size_t FactorGraph::add_factor(Factor factor) {
  check_factor(factor);
  for (const VariableId& id : factor.vars) {
    if (!contains(id)) throw std::invalid_argument("add_factor: unknown variable " + to_string(id.kind));
  }
  factors_.push_back(std::move(factor));
  return factors_.size() - 1;
}

void FactorGraph::replace_factor(std::size_t index, Factor factor) {
  if (index >= factors_.size()) throw std::invalid_argument("replace_factor: index out of range");
  check_factor(factor);
  for (const VariableId& id : factor.vars) {
    if (!contains(id)) throw std::invalid_argument("replace_factor: unknown variable " + to_string(id.kind));
  }
  factors_[index] = std::move(factor);
}

void FactorGraph::fix(VariableId id) {
  if (!contains(id)) throw std::invalid_argument("fix: unknown variable");
  fixed_.insert(id);
}

void FactorGraph::unfix(VariableId id) { fixed_.erase(id); }

FactorCost factor_cost(const Factor& f, ValueRefs values) {
  FactorCost out;
  try {
    const Eigen::VectorXd r = evaluate_residual(f, values);
    if (!r.allFinite()) throw EvaluationError("non-finite residual");
    out.cost = robust_cost(f.noise.mahalanobis2(r), f.loss);
    if (f.kind() == FactorKind::QuadricObservation && r(0) >= 1.0) out.status = FactorStatus::Plateau;
  } catch (const BehindCamera&) {
    out.status = FactorStatus::Undefined;
  } catch (const DegenerateProjection&) {
    out.status = FactorStatus::Undefined;
  }
  return out;
}

double FactorGraph::total_cost() const {
  double total = 0.0;
  std::vector<const Value*> refs;
  for (const Factor& f : factors_) {
    refs.clear();
    for (const VariableId& id : f.vars) refs.push_back(&value(id));
    total += factor_cost(f, refs).cost;
  }
  return total;
}

std::array<int, kFactorKindCount> FactorGraph::factor_counts() const {
  std::array<int, kFactorKindCount> counts{};
  for (const Factor& f : factors_) ++counts[static_cast<int>(f.kind())];
  return counts;
}

}  // namespace semslam
