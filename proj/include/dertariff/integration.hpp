#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dertariff/demand.hpp"
#include "dertariff/storage.hpp"

namespace dertariff {

enum class IntegrationMode { none, decentralized, centralized };

std::string to_string(IntegrationMode mode);
IntegrationMode parse_integration_mode(const std::string& text);

/// Customers of one class sharing the same behind-the-meter equipment.
struct CustomerGroup {
  std::size_t class_id = 0;
  double count = 0.0;
  /// Installed PV per customer (kW); output is pv_kw times the class profile.
  double pv_kw = 0.0;
  std::optional<StorageSpec> storage;
};

struct IntegrationCase {
  IntegrationMode mode = IntegrationMode::none;
  /// Empty means one DER-free group per class.
  std::vector<CustomerGroup> groups;
  double retailer_pv_kw = 0.0;
  std::optional<StorageSpec> retailer_storage;

  /// Groups with the DER that is active under `mode`: outside decentralized
  /// mode all customer equipment is stripped. Throws ValidationError when the
  /// group counts of a class do not add up to its population.
  std::vector<CustomerGroup> effective_groups(const DemandModel& model) const;

  /// Retailer PV kW and storage, zero unless centralized.
  double active_retailer_pv_kw() const;
  std::optional<StorageSpec> active_retailer_storage() const;
};

enum class AllocationRule {
  largest_first,  // whole systems to the largest-σ class first
  proportional,   // systems split across classes by population
};

AllocationRule parse_allocation_rule(const std::string& text);

struct DerOptions {
  double pv_unit_kw = 5.0;
  /// kWh of storage per kW of PV.
  double storage_ratio = 0.5;
  /// Scaled to the requested energy; rates scale with it.
  StorageSpec storage_template = StorageSpec::powerwall();
  AllocationRule allocation = AllocationRule::largest_first;
};

/// Builds the DER case for `capacity_kw` of PV. Decentralized: whole PV
/// units of `pv_unit_kw`, each owner also gets storage_ratio·pv_unit_kw kWh.
/// Centralized: the retailer holds all PV and storage_ratio·capacity kWh.
IntegrationCase make_der_case(const DemandModel& model, IntegrationMode mode, double capacity_kw,
                              const DerOptions& options);

}  // namespace dertariff
