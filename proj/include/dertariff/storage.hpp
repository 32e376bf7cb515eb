#pragma once

#include <limits>
#include <span>

#include "dertariff/scenario.hpp"

namespace dertariff {

struct StorageSpec {
  double capacity_kwh = 0.0;
  double charge_rate_kw = std::numeric_limits<double>::infinity();
  double discharge_rate_kw = std::numeric_limits<double>::infinity();
  /// One-way efficiency applied on both charge and discharge.
  double efficiency = 1.0;
  double initial_charge_kwh = 0.0;
  double period_hours = 1.0;
  /// Require the final state of charge to equal the initial one.
  bool cyclic = false;

  /// Lossless battery with unlimited power, i.e. the plain prefix-sum set.
  static StorageSpec idealized(double capacity_kwh);
  /// 6.4 kWh, 3.3 kW both ways, 96% one-way efficiency.
  static StorageSpec powerwall();

  /// Energy, rates and initial charge multiplied by `factor` ≥ 0.
  StorageSpec scaled(double factor) const;

  /// Throws ValidationError on a violated invariant.
  void validate() const;

  bool operator==(const StorageSpec&) const = default;
};

struct StorageSchedule {
  /// Meter-side kWh per period: positive is delivered, negative is drawn.
  Vector discharge;
  /// kWh held at the start of each period plus the final level (N + 1 entries).
  Vector state_of_charge;
};

struct ArbitrageResult {
  double value = 0.0;
  StorageSchedule schedule;
};

/// Maximizes πᵀs over the operating set of `spec` with a linear program in
/// separate charge and discharge variables.
ArbitrageResult arbitrage_value(const StorageSpec& spec, const PriceVector& pi);

inline constexpr Eigen::Index kBruteForceHorizonCap = 6;

/// Dynamic program over the lattice {θk/grid_steps} (plus the initial level).
/// Never exceeds the LP value. Throws std::invalid_argument for grid_steps < 2
/// or horizons above kBruteForceHorizonCap.
double brute_force_value(const StorageSpec& spec, const PriceVector& pi, int grid_steps);

double fleet_value(std::span<const StorageSpec> specs, const PriceVector& pi);

}  // namespace dertariff
