#include "dertariff/tariff.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>

#include "dertariff/errors.hpp"

namespace dertariff {

namespace {

double revenue_tolerance(double F) { return 1e-9 * std::max(std::abs(F), 1.0); }

std::string format_amount(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

}  // namespace

TariffFamily TariffFamily::parse(const std::string& text) {
  TariffFamily family;
  const auto eq = text.find('=');
  const std::string head = text.substr(0, eq);
  if (head == "optimal-two-part") {
    family.kind = FamilyKind::optimal_two_part;
  } else if (head == "flat-zero-A") {
    family.kind = FamilyKind::flat_zero_a;
  } else if (head == "dynamic-zero-A") {
    family.kind = FamilyKind::dynamic_zero_a;
  } else if (head == "flat-fixed-A") {
    family.kind = FamilyKind::flat_fixed_a;
  } else if (head == "dynamic-fixed-A") {
    family.kind = FamilyKind::dynamic_fixed_a;
  } else {
    throw ValidationError("unknown tariff family '" + text + "'");
  }
  if (eq != std::string::npos) {
    const std::string value = text.substr(eq + 1);
    std::size_t used = 0;
    double a = 0.0;
    try {
      a = std::stod(value, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != value.size() || !std::isfinite(a))
      throw ValidationError("bad connection charge in tariff family '" + text + "'");
    family.fixed_connection_charge = a;
  }
  family.validate();
  return family;
}

void TariffFamily::validate() const {
  const bool needs = kind == FamilyKind::flat_fixed_a || kind == FamilyKind::dynamic_fixed_a;
  if (needs != fixed_connection_charge.has_value())
    throw ValidationError(needs ? "tariff family needs a fixed connection charge"
                                : "tariff family does not take a fixed connection charge");
}

std::string TariffFamily::label() const {
  switch (kind) {
    case FamilyKind::optimal_two_part:
      return "optimal-two-part";
    case FamilyKind::flat_zero_a:
      return "flat-zero-A";
    case FamilyKind::dynamic_zero_a:
      return "dynamic-zero-A";
    case FamilyKind::flat_fixed_a:
      return "flat-fixed-A=" + format_amount(fixed_connection_charge.value_or(0.0));
    case FamilyKind::dynamic_fixed_a:
      return "dynamic-fixed-A=" + format_amount(fixed_connection_charge.value_or(0.0));
  }
  return "";
}

Aggregates::Aggregates(const DemandModel& model, const ScenarioSet& set, const IntegrationCase& integration)
    : model_(&model) {
  const Eigen::Index n = model.horizon();
  if (set.horizon() != n) throw ValidationError("scenario horizon does not match demand model");
  if (set.num_classes() != model.num_classes())
    throw ValidationError("scenario set and demand model disagree on the number of classes");

  const auto groups = integration.effective_groups(model);
  const double retailer_pv = integration.active_retailer_pv_kw();
  lambda_bar_ = expect_price(set);
  g_ = model.aggregate_slope();
  customers_ = model.total_customers();

  // Per-class totals: Σ_g n_g over the class, and Σ_g n_g pv_g.
  const std::size_t classes = model.num_classes();
  std::vector<double> class_count(classes, 0.0);
  std::vector<double> class_pv(classes, 0.0);
  for (const auto& g : groups) {
    class_count[g.class_id] += g.count;
    class_pv[g.class_id] += g.count * g.pv_kw;
  }

  std::vector<Vector> a(set.size());
  std::vector<Vector> r(set.size());
  a_bar_ = Vector::Zero(n);
  r_bar_ = Vector::Zero(n);
  for (std::size_t s = 0; s < set.size(); ++s) {
    const Scenario& sc = set[s];
    a[s] = Vector::Zero(n);
    r[s] = Vector::Zero(n);
    for (std::size_t c = 0; c < classes; ++c) {
      a[s] += class_count[c] * (model.sigma()[c] * model.base() + sc.disturbances[c]);
      if (class_pv[c] != 0.0) r[s] += class_pv[c] * sc.renewable_customer[c];
    }
    a_bar_ += sc.probability * a[s];
    r_bar_ += sc.probability * r[s];
    lambda_a_ += sc.probability * sc.lambda.dot(a[s]);
    lambda_r_ += sc.probability * sc.lambda.dot(r[s]);
    retailer_renewable_value_ += sc.probability * retailer_pv * sc.lambda.dot(sc.renewable_retailer);
  }
  for (std::size_t s = 0; s < set.size(); ++s) {
    const Vector dl = set[s].lambda - lambda_bar_;
    cov_lambda_a_ += set[s].probability * dl.dot(a[s] - a_bar_);
    cov_lambda_r_ += set[s].probability * dl.dot(r[s] - r_bar_);
  }

  if (const auto storage = integration.active_retailer_storage())
    retailer_storage_value_ = arbitrage_value(*storage, lambda_bar_).value;

  const Matrix& b_inv = model.slope_inverse();
  for (const auto& g : groups) {
    const std::size_t c = g.class_id;
    const double sigma = model.sigma()[c];
    GroupTerms terms{g.count, sigma, Vector::Zero(n), 0.0, g.storage};
    Vector d_mean = Vector::Zero(n);
    for (const auto& sc : set.scenarios()) d_mean += sc.probability * sc.disturbances[c];
    double var = 0.0;
    for (const auto& sc : set.scenarios()) {
      const Vector dev = sc.disturbances[c] - d_mean;
      var += sc.probability * dev.dot(b_inv * dev);
    }
    terms.intercept_mean = sigma * model.base() + d_mean;
    terms.variance_term = 0.5 * var / sigma;
    groups_.push_back(std::move(terms));
  }
}

bool Aggregates::has_customer_storage() const {
  return std::any_of(groups_.begin(), groups_.end(),
                     [](const GroupTerms& g) { return g.storage && g.storage->capacity_kwh > 0.0 && g.count > 0.0; });
}

Vector Aggregates::storage_response(const PriceVector& pi) const {
  Vector total = Vector::Zero(lambda_bar_.size());
  std::vector<std::pair<StorageSpec, Vector>> solved;
  for (const auto& g : groups_) {
    if (!g.storage || g.count == 0.0) continue;
    auto hit = std::find_if(solved.begin(), solved.end(), [&](const auto& e) { return e.first == *g.storage; });
    if (hit == solved.end()) {
      solved.emplace_back(*g.storage, arbitrage_value(*g.storage, pi).schedule.discharge);
      hit = std::prev(solved.end());
    }
    total += g.count * hit->second;
  }
  return total;
}

double Aggregates::retailer_surplus(const PriceVector& pi, double connection_charge, Settlement settlement,
                                    const Vector& storage) const {
  const double generation = settlement == Settlement::net_metering ? pi.dot(r_bar_) : lambda_bar_.dot(r_bar_);
  return customers_ * connection_charge + pi.dot(a_bar_ - g_ * pi) - pi.dot(storage) + lambda_bar_.dot(storage) -
         lambda_a_ + lambda_bar_.dot(g_ * pi) + lambda_r_ - generation + retailer_renewable_value_ +
         retailer_storage_value_;
}

double Aggregates::retailer_surplus(const PriceVector& pi, double connection_charge, Settlement settlement) const {
  return retailer_surplus(pi, connection_charge, settlement, storage_response(pi));
}

double Aggregates::consumer_surplus(const PriceVector& pi, double connection_charge, Settlement settlement,
                                    const Vector& storage) const {
  const Matrix& b_inv = model_->slope_inverse();
  const Vector b_pi = model_->slope() * pi;
  double total = 0.0;
  for (const auto& g : groups_) {
    const Vector mean_demand = g.intercept_mean - g.sigma * b_pi;
    total += g.count * (0.5 * mean_demand.dot(b_inv * mean_demand) / g.sigma + g.variance_term);
  }
  const double generation = settlement == Settlement::net_metering ? pi.dot(r_bar_) : lambda_bar_.dot(r_bar_);
  return total - customers_ * connection_charge + pi.dot(storage) + generation;
}

double Aggregates::consumer_surplus(const PriceVector& pi, double connection_charge, Settlement settlement) const {
  return consumer_surplus(pi, connection_charge, settlement, storage_response(pi));
}

double connection_charge_for(const PriceVector& prices, const DemandModel& model, const ScenarioSet& set,
                             const IntegrationCase& integration, double F, Settlement settlement) {
  if (prices.size() != model.horizon()) throw ValidationError("tariff prices have the wrong length");
  const Aggregates agg(model, set, integration);
  return (F - agg.retailer_surplus(prices, 0.0, settlement)) / agg.customers();
}

namespace {

void check_identity(double closed_form, double from_root, double F, double customers, const char* what) {
  const double scale = std::max({std::abs(closed_form), std::abs(from_root), std::abs(F) / customers});
  if (std::abs(closed_form - from_root) > 1e-8 * scale + 1e-300)
    throw IdentityMismatch(std::string(what) + ": closed-form A " + format_amount(closed_form) +
                           " disagrees with revenue-adequacy A " + format_amount(from_root));
}

}  // namespace

TwoPartTariff optimal_decentralized(const DemandModel& model, const ScenarioSet& set,
                                    const IntegrationCase& integration, double F) {
  if (integration.mode == IntegrationMode::centralized)
    throw ValidationError("optimal_decentralized needs a decentralized (or DER-free) case");
  const Aggregates agg(model, set, integration);
  const double M = agg.customers();
  const double closed = (F + agg.cov_lambda_a() - agg.cov_lambda_r()) / M;
  const double root = (F - agg.retailer_surplus(agg.lambda_bar(), 0.0, Settlement::net_metering)) / M;
  check_identity(closed, root, F, M, "decentralized optimum");
  return TwoPartTariff{closed, agg.lambda_bar(), std::nullopt};
}

FixedPointResult centralized_price_fixed_point(const PriceVector& lambda_bar, const JacobianMoments& moments,
                                               const FixedPointOptions& options) {
  if (!(options.damping > 0.0 && options.damping <= 1.0)) throw std::invalid_argument("damping must lie in (0, 1]");
  FixedPointResult result{lambda_bar, 0};
  for (int it = 0; it <= options.max_iterations; ++it) {
    const auto [jac, weighted] = moments(result.prices);
    const Vector target = lambda_bar + jac.fullPivLu().solve(weighted);
    const Vector step = target - result.prices;
    if (step.lpNorm<Eigen::Infinity>() <= options.tolerance) {
      result.iterations = it;
      return result;
    }
    if (it == options.max_iterations) break;
    result.prices += options.damping * step;
  }
  throw ConvergenceError("centralized price fixed point did not converge in " +
                         std::to_string(options.max_iterations) + " iterations");
}

TwoPartTariff optimal_centralized(const DemandModel& model, const ScenarioSet& set,
                                  const IntegrationCase& integration, double F, const FixedPointOptions& options) {
  if (integration.mode == IntegrationMode::decentralized)
    throw ValidationError("optimal_centralized needs a centralized (or DER-free) case");
  const Aggregates agg(model, set, integration);
  const double M = agg.customers();

  // For the linear family ∇D = −G in every state, so E[∇D(λ − λ̄)] = −G·0.
  static_assert(DemandModel::jacobian_state_independent());
  const Matrix jac = -agg.G();
  const Eigen::Index n = model.horizon();
  const auto moments = [&](const PriceVector&) { return std::make_pair(jac, Vector(Vector::Zero(n))); };
  const PriceVector pi = centralized_price_fixed_point(agg.lambda_bar(), moments, options).prices;

  const double margin = pi.dot(agg.a_bar() - agg.G() * pi) - agg.lambda_a() + agg.lambda_bar().dot(agg.G() * pi);
  const double a_star = (F - margin) / M;
  const double closed = a_star - (agg.retailer_storage_value() + agg.retailer_renewable_value()) / M;
  const double root = (F - agg.retailer_surplus(pi, 0.0, Settlement::net_metering)) / M;
  check_identity(closed, root, F, M, "centralized optimum");
  return TwoPartTariff{closed, pi, std::nullopt};
}

namespace {

struct FlatBranch {
  Vector storage;
  double beta = 0.0;
  double gamma = 0.0;
};

FamilySolution solve_flat(const Aggregates& agg, double A, double F, Settlement settlement) {
  const Eigen::Index n = agg.lambda_bar().size();
  const Vector e = Vector::Ones(n);
  const double alpha = -e.dot(agg.G() * e);
  const Vector ge = agg.G() * e;
  const bool storage = agg.has_customer_storage();

  // rs(p·1) = αp² + βp + γ on each sign branch; the storage schedule is
  // constant on a branch because the LP response is positively homogeneous.
  auto branch = [&](double sign) {
    FlatBranch b;
    b.storage = storage ? agg.storage_response(sign * e) : Vector(Vector::Zero(n));
    b.gamma = agg.retailer_surplus(Vector::Zero(n), A, settlement, b.storage);
    b.beta = e.dot(agg.a_bar() - b.storage) + agg.lambda_bar().dot(ge);
    if (settlement == Settlement::net_metering) b.beta -= e.dot(agg.r_bar());
    return b;
  };
  const FlatBranch branches[2] = {branch(1.0), branch(-1.0)};

  FamilySolution out;
  double best_cs = -std::numeric_limits<double>::infinity();
  double ceiling = -std::numeric_limits<double>::infinity();
  bool tangent = false;
  for (int k = 0; k < 2; ++k) {
    const FlatBranch& b = branches[k];
    const double sign = k == 0 ? 1.0 : -1.0;
    const double vertex = -b.beta / (2.0 * alpha);
    ceiling = std::max(ceiling, vertex * sign > 0.0 ? b.gamma - b.beta * b.beta / (4.0 * alpha) : b.gamma);

    const double c = b.gamma - F;
    const double disc = b.beta * b.beta - 4.0 * alpha * c;
    if (disc < 0.0) continue;
    const double root_disc = std::sqrt(disc);
    const double q = -0.5 * (b.beta + std::copysign(root_disc, b.beta));
    double candidates[2] = {q / alpha, q != 0.0 ? c / q : q / alpha};
    for (double p : candidates) {
      if (!(p * sign > 0.0) || !std::isfinite(p)) continue;
      if (std::find(out.roots.begin(), out.roots.end(), p) != out.roots.end()) continue;
      out.roots.push_back(p);
      const double cs = agg.consumer_surplus(p * e, A, settlement, b.storage);
      if (cs > best_cs || (cs == best_cs && p < out.tariff.prices(0))) {
        best_cs = cs;
        out.tariff.prices = p * e;
        tangent = disc <= 1e-8 * b.beta * b.beta;
      }
    }
  }
  std::sort(out.roots.begin(), out.roots.end());
  if (out.roots.empty())
    throw InfeasibleError("no flat price raises the revenue target " + format_amount(F) + "; ceiling is " +
                              format_amount(ceiling),
                          ceiling);
  out.tariff.connection_charge = A;
  out.near_infeasible = tangent;
  return out;
}

FamilySolution solve_dynamic(const Aggregates& agg, double A, double F, Settlement settlement, bool decentralized) {
  Vector nbar = agg.a_bar();
  if (decentralized && settlement == Settlement::net_metering) nbar -= agg.r_bar();
  const Vector v = agg.G().ldlt().solve(nbar) - agg.lambda_bar();
  const auto price = [&](double k) -> PriceVector { return agg.lambda_bar() + k * v; };
  const auto revenue = [&](double k) { return agg.retailer_surplus(price(k), A, settlement); };

  FamilySolution out;
  out.tariff.connection_charge = A;
  const double tol = revenue_tolerance(F);

  if (!agg.has_customer_storage()) {
    // rs(k) = rs(0) + (k − k²)·vᵀGv, increasing up to the monopoly point k = ½.
    const double rs0 = revenue(0.0);
    const double curvature = v.dot(agg.G() * v);
    double k = 0.0;
    if (curvature <= 1e-14 * std::max(1.0, std::abs(rs0))) {
      if (std::abs(rs0 - F) > tol)
        throw InfeasibleError("dynamic family cannot move revenue away from " + format_amount(rs0), rs0);
    } else {
      const double t = (F - rs0) / curvature;
      const double disc = 1.0 - 4.0 * t;
      const double ceiling = rs0 + 0.25 * curvature;
      if (disc < 0.0)
        throw InfeasibleError("revenue target " + format_amount(F) + " exceeds the dynamic family's ceiling " +
                                  format_amount(ceiling),
                              ceiling);
      k = 2.0 * t / (1.0 + std::sqrt(disc));
      out.near_infeasible = disc <= 1e-8;
    }
    out.tariff.prices = price(k);
    out.ramsey_index = k;
    return out;
  }

  // With customer storage the response is piecewise linear in π; bisect on k.
  double hi = 0.5;
  const double ceiling = revenue(hi);
  if (ceiling < F - tol)
    throw InfeasibleError("revenue target " + format_amount(F) + " exceeds the dynamic family's ceiling " +
                              format_amount(ceiling),
                          ceiling);
  double lo = 0.0;
  double g_lo = revenue(lo) - F;
  for (int expand = 0; g_lo > 0.0; ++expand) {
    if (expand == 60) throw InfeasibleError("could not bracket the revenue target from below", ceiling);
    hi = lo;
    lo = lo == 0.0 ? -1.0 : 2.0 * lo;
    g_lo = revenue(lo) - F;
  }
  double best_k = hi;
  double best_g = revenue(hi) - F;
  if (std::abs(g_lo) < std::abs(best_g)) {
    best_k = lo;
    best_g = g_lo;
  }
  for (int it = 0; it < 200 && std::abs(best_g) > tol && hi - lo > 1e-15 * std::max(1.0, std::abs(lo)); ++it) {
    const double mid = 0.5 * (lo + hi);
    const double g = revenue(mid) - F;
    if (std::abs(g) < std::abs(best_g)) {
      best_k = mid;
      best_g = g;
    }
    (g > 0.0 ? hi : lo) = mid;
  }
  if (std::abs(best_g) > tol)
    throw InfeasibleError("storage response jumps across the revenue target; closest shortfall " +
                              format_amount(best_g),
                          ceiling);
  out.tariff.prices = price(best_k);
  out.ramsey_index = best_k;
  out.near_infeasible = 0.5 - best_k <= 1e-4;
  return out;
}

}  // namespace

FamilySolution optimize_family(const TariffFamily& family, const DemandModel& model, const ScenarioSet& set,
                               const IntegrationCase& integration, double F, Settlement settlement) {
  family.validate();
  if (!std::isfinite(F)) throw ValidationError("revenue target must be finite");
  const Aggregates agg(model, set, integration);
  FamilySolution out;

  switch (family.kind) {
    case FamilyKind::optimal_two_part:
      if (settlement == Settlement::separate) {
        out.tariff.prices = agg.lambda_bar();
        out.tariff.connection_charge =
            (F - agg.retailer_surplus(agg.lambda_bar(), 0.0, Settlement::separate)) / agg.customers();
      } else if (integration.mode == IntegrationMode::centralized) {
        out.tariff = optimal_centralized(model, set, integration, F);
      } else {
        out.tariff = optimal_decentralized(model, set, integration, F);
      }
      break;
    case FamilyKind::flat_fixed_a:
    case FamilyKind::flat_zero_a:
      out = solve_flat(agg, family.fixed_connection_charge.value_or(0.0), F, settlement);
      break;
    case FamilyKind::dynamic_fixed_a:
    case FamilyKind::dynamic_zero_a:
      out = solve_dynamic(agg, family.fixed_connection_charge.value_or(0.0), F, settlement,
                          integration.mode == IntegrationMode::decentralized);
      break;
  }
  if (settlement == Settlement::separate) out.tariff.generation_credit = agg.lambda_bar();
  return out;
}

}  // namespace dertariff
