#pragma once

#include <vector>

#include "dertariff/scenario.hpp"

namespace dertariff {

/// Per-class linear demand  D_c(π, d) = σ_c (b₀ − Bπ) + d  with the matching
/// quadratic gross benefit. Immutable after construction.
class DemandModel {
 public:
  /// `slope` is validated for shape and symmetry only; definiteness is what
  /// validate_assumption1 reports on. Gross-benefit evaluation needs an
  /// invertible slope and throws otherwise.
  DemandModel(std::vector<double> sigma, Vector base, Matrix slope, PriceVector calibration_price,
              std::vector<double> customers_per_class);

  std::size_t num_classes() const { return sigma_.size(); }
  Eigen::Index horizon() const { return base_.size(); }

  const std::vector<double>& sigma() const { return sigma_; }
  const Vector& base() const { return base_; }
  const Matrix& slope() const { return slope_; }
  const PriceVector& calibration_price() const { return calibration_price_; }
  const std::vector<double>& customers() const { return customers_; }
  double total_customers() const;
  /// Σ_c n_c σ_c, the multiplier of B in the aggregate price Jacobian.
  double sigma_total() const;
  /// Aggregate price response G = Σ_c n_c σ_c B, so ∇_π D_agg = −G.
  Matrix aggregate_slope() const { return sigma_total() * slope_; }

  /// The price Jacobian does not depend on the customer state.
  static constexpr bool jacobian_state_independent() { return true; }

  /// B⁻¹ (throws std::domain_error if B is singular).
  const Matrix& slope_inverse() const;

 private:
  std::vector<double> sigma_;
  Vector base_;
  Matrix slope_;
  PriceVector calibration_price_;
  std::vector<double> customers_;
  Matrix slope_inverse_;
  bool invertible_ = false;
};

/// Demand of one customer of class `class_id`. Not clamped at zero.
Vector demand(const DemandModel& model, std::size_t class_id, const PriceVector& pi, const Vector& disturbance);

/// True when any period of `q` is negative (extrapolated linear demand).
bool is_degenerate(const Vector& q);

/// S_c(q, d) = (σb₀ + d)ᵀ(σB)⁻¹q − ½ qᵀ(σB)⁻¹q; the additive constant is zero.
double gross_benefit(const DemandModel& model, std::size_t class_id, const Vector& q, const Vector& disturbance);

/// ∇_q S_c(q, d); equals π at q = demand(π, d).
Vector marginal_benefit(const DemandModel& model, std::size_t class_id, const Vector& q, const Vector& disturbance);

enum class SigmaRule {
  uniform,  // σ_i = 1
  linear,   // σ_i = i
};

/// Fits b₀ and a diagonal B so that aggregate demand at `target_price` equals
/// `target_sales` and the elasticity of total daily energy under a uniform
/// scaling of `target_price` equals `elasticity`. Every period carries the
/// same own-price elasticity.
DemandModel calibrate(const Vector& target_sales, const PriceVector& target_price, double elasticity,
                      const std::vector<double>& customers_per_class, SigmaRule sigma_rule);

/// Aggregate demand Σ_c n_c D_c(π, 0).
Vector aggregate_demand(const DemandModel& model, const PriceVector& pi);

/// d log(1ᵀQ(απ)) / d log α at α = 1, with zero disturbances.
double total_elasticity(const DemandModel& model, const PriceVector& pi);

struct Assumption1Report {
  /// Eigenvalues of the symmetric part of ∇g = −Σ n_c σ_c B, ascending.
  Vector eigenvalues;
  double max_eigenvalue = 0.0;
  double min_eigenvalue = 0.0;
  bool pass = false;
};

/// Checks that ∇g(π) is negative definite. For the linear family ∇g is price
/// and state independent, so the scenario set only supplies the horizon.
Assumption1Report validate_assumption1(const DemandModel& model, const ScenarioSet& set);

}  // namespace dertariff
