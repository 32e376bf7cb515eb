#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dertariff/demand.hpp"
#include "dertariff/integration.hpp"
#include "dertariff/scenario.hpp"

namespace dertariff {

struct TwoPartTariff {
  /// $ per customer per billing cycle.
  double connection_charge = 0.0;
  PriceVector prices;
  /// When set, consumption is billed at `prices` and customer generation is
  /// credited at these rates instead of being netted against consumption.
  std::optional<PriceVector> generation_credit;

  bool separate_settlement() const { return generation_credit.has_value(); }
};

enum class Settlement { net_metering, separate };

enum class FamilyKind { optimal_two_part, flat_fixed_a, flat_zero_a, dynamic_fixed_a, dynamic_zero_a };

struct TariffFamily {
  FamilyKind kind = FamilyKind::optimal_two_part;
  std::optional<double> fixed_connection_charge;

  /// Accepts "optimal-two-part", "flat-zero-A", "dynamic-zero-A",
  /// "flat-fixed-A=<A>" and "dynamic-fixed-A=<A>".
  static TariffFamily parse(const std::string& text);
  std::string label() const;
  void validate() const;
};

/// Scenario aggregates of one (model, scenario set, case) triple, from
/// which expected retailer and consumer surplus follow in closed form:
/// aggregate demand in scenario s is a_s − Gπ, customer generation R_s,
/// customer storage S(π) is deterministic given π.
class Aggregates {
 public:
  Aggregates(const DemandModel& model, const ScenarioSet& set, const IntegrationCase& integration);

  const PriceVector& lambda_bar() const { return lambda_bar_; }
  const Matrix& G() const { return g_; }
  const Vector& a_bar() const { return a_bar_; }
  const Vector& r_bar() const { return r_bar_; }
  double customers() const { return customers_; }
  /// E[λᵀa], E[λᵀR].
  double lambda_a() const { return lambda_a_; }
  double lambda_r() const { return lambda_r_; }
  /// Σ_t Cov(λ_t, a_t) and Σ_t Cov(λ_t, R_t).
  double cov_lambda_a() const { return cov_lambda_a_; }
  double cov_lambda_r() const { return cov_lambda_r_; }
  /// E[λᵀr^o] and V^S(λ̄, θ^o) of the retailer's own equipment.
  double retailer_renewable_value() const { return retailer_renewable_value_; }
  double retailer_storage_value() const { return retailer_storage_value_; }
  bool has_customer_storage() const;

  /// Σ_g n_g s*(π, θ_g).
  Vector storage_response(const PriceVector& pi) const;

  /// Expected retailer surplus given the aggregate storage response.
  double retailer_surplus(const PriceVector& pi, double connection_charge, Settlement settlement,
                          const Vector& storage) const;
  double retailer_surplus(const PriceVector& pi, double connection_charge, Settlement settlement) const;

  /// Expected consumer surplus, using E[S(D) − πᵀD] = ½D̄ᵀH⁻¹D̄ + ½tr(H⁻¹Cov d).
  double consumer_surplus(const PriceVector& pi, double connection_charge, Settlement settlement,
                          const Vector& storage) const;
  double consumer_surplus(const PriceVector& pi, double connection_charge, Settlement settlement) const;

 private:
  struct GroupTerms {
    double count;
    double sigma;
    Vector intercept_mean;  // σ b₀ + E[d]
    double variance_term;   // ½ tr(H⁻¹ Cov d)
    std::optional<StorageSpec> storage;
  };

  const DemandModel* model_;
  PriceVector lambda_bar_;
  Matrix g_;
  Vector a_bar_;
  Vector r_bar_;
  double customers_ = 0.0;
  double lambda_a_ = 0.0;
  double lambda_r_ = 0.0;
  double cov_lambda_a_ = 0.0;
  double cov_lambda_r_ = 0.0;
  double retailer_renewable_value_ = 0.0;
  double retailer_storage_value_ = 0.0;
  std::vector<GroupTerms> groups_;
};

/// Connection charge that makes expected retailer surplus equal F at prices π.
double connection_charge_for(const PriceVector& prices, const DemandModel& model, const ScenarioSet& set,
                             const IntegrationCase& integration, double F,
                             Settlement settlement = Settlement::net_metering);

/// π = λ̄ with A = (F + tr cov(λ, D(λ̄, ω)) − tr cov(λ, r))/M. Throws
/// IdentityMismatch if A disagrees with connection_charge_for.
TwoPartTariff optimal_decentralized(const DemandModel& model, const ScenarioSet& set,
                                    const IntegrationCase& integration, double F);

struct FixedPointOptions {
  double damping = 0.5;
  double tolerance = 1e-10;
  int max_iterations = 100;
};

/// (E[∇_π D(π)], E[∇_π D(π)(λ − λ̄)]) at a trial price.
using JacobianMoments = std::function<std::pair<Matrix, Vector>(const PriceVector&)>;

struct FixedPointResult {
  PriceVector prices;
  int iterations = 0;
};

/// Damped iteration of π ← λ̄ + E[∇D]⁻¹E[∇D(λ − λ̄)] starting from λ̄.
/// Throws ConvergenceError at the iteration cap.
FixedPointResult centralized_price_fixed_point(const PriceVector& lambda_bar, const JacobianMoments& moments,
                                               const FixedPointOptions& options = {});

/// Centralized optimum: fixed-point prices, A = A* − (V^S(λ̄,θ^o) + E[λᵀr^o])/M.
TwoPartTariff optimal_centralized(const DemandModel& model, const ScenarioSet& set,
                                  const IntegrationCase& integration, double F,
                                  const FixedPointOptions& options = {});

struct FamilySolution {
  TwoPartTariff tariff;
  /// Flat families: every flat price meeting the revenue target.
  std::vector<double> roots;
  /// Dynamic families: Ramsey index k of π = λ̄ + k(G⁻¹n̄ − λ̄).
  std::optional<double> ramsey_index;
  /// The target sits at (or numerically next to) the family's revenue ceiling.
  bool near_infeasible = false;
};

/// Consumer-surplus maximizing family member with expected retailer surplus F.
/// Throws InfeasibleError carrying the family's revenue ceiling.
FamilySolution optimize_family(const TariffFamily& family, const DemandModel& model, const ScenarioSet& set,
                               const IntegrationCase& integration, double F,
                               Settlement settlement = Settlement::net_metering);

}  // namespace dertariff
