#pragma once

#include <array>
#include <map>
#include <set>
#include <vector>

#include "semslam/factors/factor.hpp"
#include "semslam/factors/variables.hpp"

namespace semslam {

/// Variables, typed factors and the fixed (gauge) set. Variable storage is
/// ordered by id so every traversal is deterministic.
class FactorGraph {
 public:
  /// Adds a value under the next free index of its kind. Planes are stored
  /// normalized. Throws std::invalid_argument for invalid values.
  VariableId add_variable(const Value& value);
  /// Adds a value under a caller-chosen id (e.g. pose index = frame id).
  VariableId add_variable(VariableId id, const Value& value);

  bool contains(VariableId id) const { return values_.count(id) != 0; }
  const Value& value(VariableId id) const;
  void set_value(VariableId id, const Value& value);

  template <typename T>
  const T& get(VariableId id) const {
    return std::get<T>(value(id));
  }

  /// Checks slot ids and kinds; returns the factor index.
  std::size_t add_factor(Factor factor);
  const std::vector<Factor>& factors() const { return factors_; }
  /// Swaps in a new factor at an existing index (same checks as add_factor).
  void replace_factor(std::size_t index, Factor factor);

  void fix(VariableId id);
  void unfix(VariableId id);
  bool is_fixed(VariableId id) const { return fixed_.count(id) != 0; }
  const std::set<VariableId>& fixed() const { return fixed_; }

  const std::map<VariableId, Value>& values() const { return values_; }
  std::size_t num_variables() const { return values_.size(); }

  /// Sum of robust squared Mahalanobis terms. Factors whose prediction is
  /// undefined contribute 0.
  double total_cost() const;

  /// Per-kind factor counts.
  std::array<int, kFactorKindCount> factor_counts() const;

 private:
  std::map<VariableId, Value> values_;
  std::array<int, 4> next_index_{0, 0, 0, 0};
  std::vector<Factor> factors_;
  std::set<VariableId> fixed_;
};

/// Cost of a single factor at the given values and whether it was defined.
struct FactorCost {
  FactorStatus status = FactorStatus::Active;
  double cost = 0.0;
};

FactorCost factor_cost(const Factor& f, ValueRefs values);

}  // namespace semslam
