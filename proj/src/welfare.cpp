#include "dertariff/welfare.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "dertariff/errors.hpp"

namespace dertariff {

namespace {

Settlement settlement_of(const TwoPartTariff& tariff) {
  return tariff.separate_settlement() ? Settlement::separate : Settlement::net_metering;
}

// Meter-side schedule per group, solving each distinct battery once.
std::vector<Vector> group_schedules(const std::vector<CustomerGroup>& groups, const PriceVector& pi) {
  std::vector<Vector> out;
  std::vector<std::pair<StorageSpec, Vector>> solved;
  for (const auto& g : groups) {
    if (!g.storage) {
      out.push_back(Vector::Zero(pi.size()));
      continue;
    }
    auto hit = std::find_if(solved.begin(), solved.end(), [&](const auto& e) { return e.first == *g.storage; });
    if (hit == solved.end()) {
      solved.emplace_back(*g.storage, arbitrage_value(*g.storage, pi).schedule.discharge);
      hit = std::prev(solved.end());
    }
    out.push_back(hit->second);
  }
  return out;
}

}  // namespace

SurplusReport evaluate(const TwoPartTariff& tariff, const DemandModel& model, const ScenarioSet& set,
                       const IntegrationCase& integration) {
  const Eigen::Index n = model.horizon();
  if (tariff.prices.size() != n || set.horizon() != n) throw ValidationError("tariff, model and scenarios disagree on N");
  if (tariff.generation_credit && tariff.generation_credit->size() != n)
    throw ValidationError("generation credit has the wrong length");
  if (set.num_classes() != model.num_classes()) throw ValidationError("scenario set has the wrong number of classes");

  const auto groups = integration.effective_groups(model);
  const PriceVector& pi = tariff.prices;
  const double A = tariff.connection_charge;
  const auto storage = group_schedules(groups, pi);

  const PriceVector lambda_bar = expect_price(set);
  const double retailer_pv = integration.active_retailer_pv_kw();
  Vector retailer_storage = Vector::Zero(n);
  if (const auto spec = integration.active_retailer_storage())
    retailer_storage = arbitrage_value(*spec, lambda_bar).schedule.discharge;

  SurplusReport report;
  report.per_class_cs.assign(model.num_classes(), 0.0);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    GroupReport gr;
    gr.class_id = groups[g].class_id;
    gr.count = groups[g].count;
    gr.pv_kw = groups[g].pv_kw;
    gr.storage_kwh = groups[g].storage ? groups[g].storage->capacity_kwh : 0.0;
    report.groups.push_back(gr);
  }

  auto& diag = report.diagnostics;
  for (const auto& sc : set.scenarios()) {
    const double p = sc.probability;
    Vector withdrawals = Vector::Zero(n);
    double gross_payments = 0.0;
    double booked_margin = 0.0;
    for (std::size_t g = 0; g < groups.size(); ++g) {
      const CustomerGroup& grp = groups[g];
      const std::size_t c = grp.class_id;
      const Vector q = demand(model, c, pi, sc.disturbances[c]);
      diag.negative_demand_cells += static_cast<std::size_t>((q.array() < 0.0).count());
      const Vector r = grp.pv_kw * sc.renewable_customer[c];
      const Vector& s = storage[g];
      const Vector net = q - r - s;

      const PriceVector& credit = tariff.generation_credit ? *tariff.generation_credit : pi;
      const double payment = A + pi.dot(q - s) - credit.dot(r);
      const double benefit = gross_benefit(model, c, q, sc.disturbances[c]);

      GroupReport& gr = report.groups[g];
      gr.payments += p * grp.count * payment;
      gr.energy_cost += p * grp.count * sc.lambda.dot(net);
      gr.cs += p * grp.count * (benefit - payment);
      diag.storage_value += p * grp.count * pi.dot(s);
      diag.renewable_value += p * grp.count * credit.dot(r);

      withdrawals += grp.count * net;
      gross_payments += grp.count * payment;
      booked_margin += grp.count * (A + (pi - sc.lambda).dot(q - s) - (credit - sc.lambda).dot(r));
    }
    const Vector retailer_supply = retailer_pv * sc.renewable_retailer + retailer_storage;
    const double cost = sc.lambda.dot(withdrawals - retailer_supply);
    const double rs = gross_payments - cost;
    booked_margin += sc.lambda.dot(retailer_supply);

    report.rs += p * rs;
    diag.revenue += p * gross_payments;
    diag.retailer_der_value += p * sc.lambda.dot(retailer_supply);
    const double scale = std::max({1.0, std::abs(gross_payments), std::abs(cost)});
    diag.settlement_residual = std::max(diag.settlement_residual, std::abs(rs - booked_margin) / scale);
  }

  for (const auto& gr : report.groups) {
    report.cs += gr.cs;
    report.per_class_cs[gr.class_id] += gr.cs;
  }
  report.sw = report.cs + report.rs;
  return report;
}

double cs_decomposition(const TwoPartTariff& tariff, const DemandModel& model, const ScenarioSet& set,
                        const IntegrationCase& integration) {
  const Aggregates agg(model, set, integration);
  return agg.consumer_surplus(tariff.prices, tariff.connection_charge, settlement_of(tariff));
}

double sw_star0(const DemandModel& model, const ScenarioSet& set) {
  const PriceVector lambda_bar = expect_price(set);
  double total = 0.0;
  for (const auto& sc : set.scenarios()) {
    double acc = 0.0;
    for (std::size_t c = 0; c < model.num_classes(); ++c) {
      const Vector q = demand(model, c, lambda_bar, sc.disturbances[c]);
      acc += model.customers()[c] * (gross_benefit(model, c, q, sc.disturbances[c]) - sc.lambda.dot(q));
    }
    total += sc.probability * acc;
  }
  return total;
}

IdentityReport welfare_identities(const DemandModel& model, const ScenarioSet& set,
                                  const IntegrationCase& integration, double F) {
  return welfare_identities(model, set, integration, F, 0.1 * std::abs(F) + 1.0);
}

IdentityReport welfare_identities(const DemandModel& model, const ScenarioSet& set,
                                  const IntegrationCase& integration, double F, double delta) {
  const TariffFamily optimal{};
  IdentityReport out;
  const TwoPartTariff t1 = optimize_family(optimal, model, set, integration, F).tariff;
  const TwoPartTariff t2 = optimize_family(optimal, model, set, integration, F + delta).tariff;
  out.sw_at_f = evaluate(t1, model, set, integration).sw;
  out.sw_at_f_plus_delta = evaluate(t2, model, set, integration).sw;
  out.sw_star0 = sw_star0(model, set);
  out.der_gain = out.sw_at_f - out.sw_star0;

  const PriceVector lambda_bar = expect_price(set);
  const Aggregates agg(model, set, integration);
  if (integration.mode == IntegrationMode::decentralized) {
    const auto groups = integration.effective_groups(model);
    const auto schedules = group_schedules(groups, lambda_bar);
    for (std::size_t g = 0; g < groups.size(); ++g) out.expected_der_gain += groups[g].count * lambda_bar.dot(schedules[g]);
    out.expected_der_gain += agg.lambda_r();
  } else if (integration.mode == IntegrationMode::centralized) {
    out.expected_der_gain = agg.retailer_storage_value() + agg.retailer_renewable_value();
  }

  if (std::abs(out.sw_at_f - out.sw_at_f_plus_delta) > 1e-9 * std::abs(out.sw_at_f))
    out.violations.push_back("social welfare at the optimum moves with F");
  const double tol =
      1e-8 * std::max(std::abs(out.expected_der_gain), std::abs(out.der_gain)) + 1e-12 * std::abs(out.sw_star0);
  if (std::abs(out.der_gain - out.expected_der_gain) > tol)
    out.violations.push_back("welfare gain over sw*0 differs from the DER value at the mean price");
  return out;
}

double planner_bound(const DemandModel& model, const ScenarioSet& set, const IntegrationCase& integration) {
  if (integration.mode == IntegrationMode::centralized)
    throw ValidationError("planner bound is defined for decentralized or DER-free cases");
  if (set.num_classes() != model.num_classes()) throw ValidationError("scenario set has the wrong number of classes");
  const auto groups = integration.effective_groups(model);
  const Matrix& b_inv = model.slope_inverse();

  double total = 0.0;
  for (const auto& grp : groups) {
    if (grp.count == 0.0) continue;
    const std::size_t c = grp.class_id;
    const double sigma = model.sigma()[c];

    // Local-state support of this class: (disturbance, renewable profile).
    struct Cell {
      double weight = 0.0;
      Vector lambda_sum;
      std::size_t representative = 0;
    };
    std::map<std::vector<std::uint64_t>, Cell> support;
    double renewable_value = 0.0;
    for (std::size_t s = 0; s < set.size(); ++s) {
      const Scenario& sc = set[s];
      auto key = bit_key(sc.disturbances[c]);
      const auto tail = bit_key(sc.renewable_customer[c]);
      key.insert(key.end(), tail.begin(), tail.end());
      auto [it, inserted] = support.try_emplace(std::move(key));
      if (inserted) {
        it->second.lambda_sum = Vector::Zero(set.horizon());
        it->second.representative = s;
      }
      it->second.weight += sc.probability;
      it->second.lambda_sum += sc.probability * sc.lambda;
      renewable_value += sc.probability * sc.lambda.dot(sc.renewable_customer[c]);
    }

    double per_customer = grp.pv_kw * renewable_value;
    for (const auto& [key, cell] : support) {
      if (cell.weight == 0.0) continue;
      const PriceVector mu = cell.lambda_sum / cell.weight;
      const Vector q = demand(model, c, mu, set[cell.representative].disturbances[c]);
      double value = 0.5 * q.dot(b_inv * q) / sigma;
      if (grp.storage) value += arbitrage_value(*grp.storage, mu).value;
      per_customer += cell.weight * value;
    }
    total += grp.count * per_customer;
  }
  return total;
}

BaseCase base_case(const DemandModel& model, const ScenarioSet& set, double nominal_price, double nominal_charge) {
  BaseCase base;
  base.tariff.connection_charge = nominal_charge;
  base.tariff.prices = PriceVector::Constant(model.horizon(), nominal_price);
  const SurplusReport report = evaluate(base.tariff, model, set, IntegrationCase{});
  base.cs = report.cs;
  base.rs = report.rs;
  base.sw = report.sw;
  base.revenue = report.diagnostics.revenue;
  if (!(base.revenue > 0.0)) throw ValidationError("nominal tariff raises no revenue; gains cannot be normalized");
  return base;
}

std::vector<ParetoPoint> pareto_front(const TariffFamily& family, const DemandModel& model, const ScenarioSet& set,
                                      const IntegrationCase& integration, const std::vector<double>& f_grid,
                                      const BaseCase& base) {
  if (f_grid.empty()) throw ValidationError("F grid is empty");
  std::vector<ParetoPoint> out;
  for (double F : f_grid) {
    ParetoPoint pt;
    pt.F = F;
    pt.rs_gain = (F - base.rs) / base.revenue;
    try {
      const FamilySolution sol = optimize_family(family, model, set, integration, F);
      const SurplusReport report = evaluate(sol.tariff, model, set, integration);
      pt.feasible = true;
      pt.tariff = sol.tariff;
      pt.near_infeasible = sol.near_infeasible;
      pt.cs_gain = (report.cs - base.cs) / base.revenue;
      pt.sw_gain = (report.sw - base.sw) / base.revenue;
    } catch (const InfeasibleError& e) {
      pt.reason = e.what();
    }
    out.push_back(std::move(pt));
  }
  return out;
}

std::vector<SweepRow> der_sweep(const std::vector<TariffFamily>& families, const DemandModel& model,
                                const ScenarioSet& set, IntegrationMode mode, const std::vector<double>& capacity_grid,
                                const DerOptions& options, double F, const BaseCase& base) {
  std::vector<SweepRow> out;
  for (double capacity : capacity_grid) {
    const IntegrationCase integration = make_der_case(model, mode, capacity, options);
    for (const auto& family : families) {
      SweepRow row;
      row.capacity_kw = capacity;
      row.family = family.label();
      try {
        const FamilySolution sol = optimize_family(family, model, set, integration, F);
        const SurplusReport report = evaluate(sol.tariff, model, set, integration);
        row.feasible = true;
        row.tariff = sol.tariff;
        row.near_infeasible = sol.near_infeasible;
        row.cs_gain = (report.cs - base.cs) / base.revenue;
        row.rs_gain = (report.rs - base.rs) / base.revenue;
        row.sw_gain = (report.sw - base.sw) / base.revenue;
      } catch (const InfeasibleError& e) {
        row.reason = e.what();
      }
      out.push_back(std::move(row));
    }
  }
  return out;
}

namespace {

double owner_contribution(const SurplusReport& report) {
  double total = 0.0;
  for (const auto& g : report.groups)
    if (g.pv_kw > 0.0) total += g.payments - g.energy_cost;
  return total;
}

}  // namespace

std::vector<CrossSubsidyRow> cross_subsidy(const TariffFamily& family, const DemandModel& model,
                                           const ScenarioSet& set, const std::vector<double>& capacity_grid,
                                           const DerOptions& options, double F) {
  if (F == 0.0) throw ValidationError("cross-subsidies are normalized by F, which must be nonzero");
  DerOptions pv_only = options;
  pv_only.storage_ratio = 0.0;

  std::vector<CrossSubsidyRow> out;
  for (double capacity : capacity_grid) {
    const IntegrationCase integration = make_der_case(model, IntegrationMode::decentralized, capacity, pv_only);
    CrossSubsidyRow row;
    row.capacity_kw = capacity;
    try {
      row.net_metering = optimize_family(family, model, set, integration, F, Settlement::net_metering).tariff;
      row.separate = optimize_family(family, model, set, integration, F, Settlement::separate).tariff;
      row.contribution_net_metering = owner_contribution(evaluate(row.net_metering, model, set, integration));
      row.contribution_separate = owner_contribution(evaluate(row.separate, model, set, integration));
      row.subsidy = (row.contribution_separate - row.contribution_net_metering) / F;
      row.feasible = true;
    } catch (const InfeasibleError& e) {
      row.reason = e.what();
    }
    out.push_back(std::move(row));
  }
  return out;
}

}  // namespace dertariff
