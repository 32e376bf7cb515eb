#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace dertariff {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
/// $/kWh, one entry per period of the billing cycle.
using PriceVector = Eigen::VectorXd;

/// One realization of the global state: wholesale prices and every
/// customer class's local state.
struct Scenario {
  double probability = 0.0;
  PriceVector lambda;
  /// Per class, additive kWh demand shift of one customer.
  std::vector<Vector> disturbances;
  /// Per class, renewable output in kWh per kW installed.
  std::vector<Vector> renewable_customer;
  /// Retailer-sited renewable output in kWh per kW installed.
  Vector renewable_retailer;
};

/// Finite weighted scenario set; every expectation is an exact weighted sum.
/// Immutable after construction.
class ScenarioSet {
 public:
  /// Throws ValidationError when the set violates its invariants
  /// (lengths, finiteness, nonnegative renewables, weights summing to 1).
  ScenarioSet(Eigen::Index horizon, std::vector<Scenario> scenarios, bool independent = false);

  Eigen::Index horizon() const { return horizon_; }
  std::size_t num_classes() const { return num_classes_; }
  std::size_t size() const { return scenarios_.size(); }
  bool independent() const { return independent_; }
  const std::vector<Scenario>& scenarios() const { return scenarios_; }
  const Scenario& operator[](std::size_t i) const { return scenarios_[i]; }

 private:
  Eigen::Index horizon_;
  std::size_t num_classes_;
  std::vector<Scenario> scenarios_;
  bool independent_;
};

PriceVector expect_price(const ScenarioSet& set);

/// Σ_s p_s f(scenario_s) for an N-vector valued selector.
template <class Selector>
Vector expect(const ScenarioSet& set, Selector&& field) {
  Vector acc = Vector::Zero(set.horizon());
  for (const auto& s : set.scenarios()) acc += s.probability * Vector(field(s));
  return acc;
}

/// Σ_s p_s f(scenario_s) for a scalar selector.
template <class Selector>
double expect_scalar(const ScenarioSet& set, Selector&& field) {
  double acc = 0.0;
  for (const auto& s : set.scenarios()) acc += s.probability * static_cast<double>(field(s));
  return acc;
}

/// Σ_t Cov(a_t, b_t) under the scenario weights (population covariance).
template <class SelectorA, class SelectorB>
double cov_trace(const ScenarioSet& set, SelectorA&& field_a, SelectorB&& field_b) {
  const Vector mean_a = expect(set, field_a);
  const Vector mean_b = expect(set, field_b);
  double acc = 0.0;
  for (const auto& s : set.scenarios()) {
    acc += s.probability * (Vector(field_a(s)) - mean_a).dot(Vector(field_b(s)) - mean_b);
  }
  return acc;
}

/// Product of the λ-marginal and the ω-marginal (disturbances plus all
/// renewable profiles). Support points are identified by bitwise equality.
ScenarioSet split_marginals(const ScenarioSet& set);

/// Bitwise lexicographic key for support identification.
std::vector<std::uint64_t> bit_key(const Vector& v);

}  // namespace dertariff
