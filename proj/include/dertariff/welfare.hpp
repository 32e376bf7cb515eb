#pragma once

#include <string>
#include <vector>

#include "dertariff/integration.hpp"
#include "dertariff/tariff.hpp"

namespace dertariff {

struct GroupReport {
  std::size_t class_id = 0;
  double count = 0.0;
  double pv_kw = 0.0;
  double storage_kwh = 0.0;
  /// Expected group totals for one billing cycle ($).
  double payments = 0.0;
  double energy_cost = 0.0;  // λᵀ(net withdrawals)
  double cs = 0.0;
};

struct SurplusDiagnostics {
  /// (scenario, group, period) cells where linear demand went negative.
  std::size_t negative_demand_cells = 0;
  /// Expected customer savings from storage, πᵀs summed over customers.
  double storage_value = 0.0;
  /// Expected value of customer generation at the rate it is settled.
  double renewable_value = 0.0;
  /// E[λᵀr^o] + λ̄ᵀs^o for retailer equipment.
  double retailer_der_value = 0.0;
  /// Expected total payments.
  double revenue = 0.0;
  /// Largest per-scenario gap between the two retailer-surplus bookings,
  /// relative to the scenario's gross payments.
  double settlement_residual = 0.0;

  bool extrapolated() const { return negative_demand_cells > 0; }
};

struct SurplusReport {
  double cs = 0.0;
  double rs = 0.0;
  double sw = 0.0;
  std::vector<double> per_class_cs;
  /// In the order of IntegrationCase::effective_groups.
  std::vector<GroupReport> groups;
  SurplusDiagnostics diagnostics;
};

/// Settles every scenario customer by customer and aggregates the
/// probability-weighted surpluses.
SurplusReport evaluate(const TwoPartTariff& tariff, const DemandModel& model, const ScenarioSet& set,
                       const IntegrationCase& integration);

/// Expected consumer surplus from the aggregate closed form.
double cs_decomposition(const TwoPartTariff& tariff, const DemandModel& model, const ScenarioSet& set,
                        const IntegrationCase& integration);

/// Σ_c n_c E[S(D(λ̄, ω)) − λᵀD(λ̄, ω)], the DER-free optimal welfare.
double sw_star0(const DemandModel& model, const ScenarioSet& set);

struct IdentityReport {
  double sw_at_f = 0.0;
  double sw_at_f_plus_delta = 0.0;
  double sw_star0 = 0.0;
  double der_gain = 0.0;           // sw(T*) − sw*₀
  double expected_der_gain = 0.0;  // storage values plus E[λᵀr]
  std::vector<std::string> violations;

  bool pass() const { return violations.empty(); }
};

/// Checks that sw(T*) does not move with F and that its excess over sw*₀ is
/// the DER value at λ̄. Δ defaults to 0.1|F| + 1.
IdentityReport welfare_identities(const DemandModel& model, const ScenarioSet& set,
                                  const IntegrationCase& integration, double F);
IdentityReport welfare_identities(const DemandModel& model, const ScenarioSet& set,
                                  const IntegrationCase& integration, double F, double delta);

/// Welfare of a planner deciding each group's consumption and storage from
/// its own local state, using E[λ | ω^c] over the discrete support.
/// Decentralized or DER-free cases only.
double planner_bound(const DemandModel& model, const ScenarioSet& set, const IntegrationCase& integration);

struct BaseCase {
  TwoPartTariff tariff;
  double cs = 0.0;
  double rs = 0.0;
  double sw = 0.0;
  double revenue = 0.0;
};

/// Flat nominal tariff with no DER; the normalization anchor for all gains.
BaseCase base_case(const DemandModel& model, const ScenarioSet& set, double nominal_price, double nominal_charge);

struct ParetoPoint {
  double F = 0.0;
  bool feasible = false;
  std::string reason;
  double cs_gain = 0.0;
  double rs_gain = 0.0;
  double sw_gain = 0.0;
  bool near_infeasible = false;
  TwoPartTariff tariff;
};

std::vector<ParetoPoint> pareto_front(const TariffFamily& family, const DemandModel& model, const ScenarioSet& set,
                                      const IntegrationCase& integration, const std::vector<double>& f_grid,
                                      const BaseCase& base);

struct SweepRow {
  double capacity_kw = 0.0;
  std::string family;
  bool feasible = false;
  std::string reason;
  double cs_gain = 0.0;
  double rs_gain = 0.0;
  double sw_gain = 0.0;
  bool near_infeasible = false;
  TwoPartTariff tariff;
};

/// Rows ordered by capacity, then family.
std::vector<SweepRow> der_sweep(const std::vector<TariffFamily>& families, const DemandModel& model,
                                const ScenarioSet& set, IntegrationMode mode, const std::vector<double>& capacity_grid,
                                const DerOptions& options, double F, const BaseCase& base);

struct CrossSubsidyRow {
  double capacity_kw = 0.0;
  bool feasible = false;
  std::string reason;
  /// PV-owner contributions toward fixed costs, E[Σ(payment − λᵀd)].
  double contribution_net_metering = 0.0;
  double contribution_separate = 0.0;
  /// (contribution_separate − contribution_net_metering) / F.
  double subsidy = 0.0;
  TwoPartTariff net_metering;
  TwoPartTariff separate;
};

/// Decentralized PV without storage, net metering against separate settlement.
std::vector<CrossSubsidyRow> cross_subsidy(const TariffFamily& family, const DemandModel& model,
                                           const ScenarioSet& set, const std::vector<double>& capacity_grid,
                                           const DerOptions& options, double F);

}  // namespace dertariff
