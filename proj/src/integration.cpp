#include "dertariff/integration.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dertariff/errors.hpp"

namespace dertariff {

std::string to_string(IntegrationMode mode) {
  switch (mode) {
    case IntegrationMode::none:
      return "none";
    case IntegrationMode::decentralized:
      return "decentralized";
    case IntegrationMode::centralized:
      return "centralized";
  }
  return "none";
}

IntegrationMode parse_integration_mode(const std::string& text) {
  if (text == "none") return IntegrationMode::none;
  if (text == "decentralized") return IntegrationMode::decentralized;
  if (text == "centralized") return IntegrationMode::centralized;
  throw ValidationError("unknown integration mode '" + text + "'");
}

AllocationRule parse_allocation_rule(const std::string& text) {
  if (text == "largest_first") return AllocationRule::largest_first;
  if (text == "proportional") return AllocationRule::proportional;
  throw ValidationError("unknown PV allocation rule '" + text + "'");
}

std::vector<CustomerGroup> IntegrationCase::effective_groups(const DemandModel& model) const {
  const std::size_t classes = model.num_classes();
  std::vector<CustomerGroup> out;
  if (groups.empty()) {
    for (std::size_t c = 0; c < classes; ++c) out.push_back({c, model.customers()[c], 0.0, std::nullopt});
    return out;
  }

  std::vector<double> seen(classes, 0.0);
  for (const auto& g : groups) {
    if (g.class_id >= classes) throw ValidationError("customer group refers to an unknown class");
    if (!(g.count >= 0.0) || !std::isfinite(g.count)) throw ValidationError("customer group count must be >= 0");
    if (!(g.pv_kw >= 0.0) || !std::isfinite(g.pv_kw)) throw ValidationError("customer PV must be >= 0 kW");
    if (g.storage) g.storage->validate();
    seen[g.class_id] += g.count;
    CustomerGroup eff = g;
    if (mode != IntegrationMode::decentralized) {
      eff.pv_kw = 0.0;
      eff.storage.reset();
    }
    out.push_back(std::move(eff));
  }
  for (std::size_t c = 0; c < classes; ++c) {
    const double expected = model.customers()[c];
    if (std::abs(seen[c] - expected) > 1e-9 * std::max(1.0, expected))
      throw ValidationError("customer groups of class " + std::to_string(c) + " hold " + std::to_string(seen[c]) +
                            " customers, expected " + std::to_string(expected));
  }
  return out;
}

double IntegrationCase::active_retailer_pv_kw() const {
  if (mode != IntegrationMode::centralized) return 0.0;
  if (!(retailer_pv_kw >= 0.0) || !std::isfinite(retailer_pv_kw)) throw ValidationError("retailer PV must be >= 0 kW");
  return retailer_pv_kw;
}

std::optional<StorageSpec> IntegrationCase::active_retailer_storage() const {
  if (mode != IntegrationMode::centralized || !retailer_storage) return std::nullopt;
  retailer_storage->validate();
  return retailer_storage;
}

namespace {

std::optional<StorageSpec> sized_storage(const DerOptions& options, double kwh) {
  if (!(kwh > 0.0)) return std::nullopt;
  const double base = options.storage_template.capacity_kwh;
  if (!(base > 0.0)) throw ValidationError("storage template must have positive capacity");
  return options.storage_template.scaled(kwh / base);
}

}  // namespace

IntegrationCase make_der_case(const DemandModel& model, IntegrationMode mode, double capacity_kw,
                              const DerOptions& options) {
  if (!(capacity_kw >= 0.0) || !std::isfinite(capacity_kw)) throw ValidationError("DER capacity must be >= 0");
  if (!(options.storage_ratio >= 0.0)) throw ValidationError("storage ratio must be >= 0");
  IntegrationCase out;
  out.mode = mode;
  if (mode == IntegrationMode::centralized) {
    out.retailer_pv_kw = capacity_kw;
    out.retailer_storage = sized_storage(options, options.storage_ratio * capacity_kw);
    return out;
  }
  if (mode != IntegrationMode::decentralized) return out;

  if (!(options.pv_unit_kw > 0.0)) throw ValidationError("PV unit size must be positive");
  const double systems = std::floor(capacity_kw / options.pv_unit_kw + 1e-9);
  const double population = model.total_customers();
  if (systems > population) throw ValidationError("more PV systems than customers");

  const std::size_t classes = model.num_classes();
  std::vector<double> owners(classes, 0.0);
  if (options.allocation == AllocationRule::largest_first) {
    std::vector<std::size_t> order(classes);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return model.sigma()[a] > model.sigma()[b]; });
    double left = systems;
    for (std::size_t c : order) {
      owners[c] = std::min(left, std::floor(model.customers()[c]));
      left -= owners[c];
    }
  } else {
    for (std::size_t c = 0; c < classes; ++c) owners[c] = systems * model.customers()[c] / population;
  }

  const auto storage = sized_storage(options, options.storage_ratio * options.pv_unit_kw);
  for (std::size_t c = 0; c < classes; ++c) {
    const double rest = model.customers()[c] - owners[c];
    if (owners[c] > 0.0) out.groups.push_back({c, owners[c], options.pv_unit_kw, storage});
    if (rest > 0.0 || owners[c] == 0.0) out.groups.push_back({c, rest, 0.0, std::nullopt});
  }
  return out;
}

}  // namespace dertariff
