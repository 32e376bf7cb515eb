#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dertariff/demand.hpp"
#include "dertariff/integration.hpp"
#include "dertariff/scenario.hpp"
#include "dertariff/tariff.hpp"

namespace dertariff {

enum class ScenarioMode { paired, product };

/// Study settings. Defaults describe the nominal residential study.
struct StudyConfig {
  // [study]
  int horizon = 24;
  double customers = 2.2e6;
  int classes = 5;
  SigmaRule sigma_rule = SigmaRule::linear;
  double elasticity = -0.3;
  ScenarioMode scenario_mode = ScenarioMode::paired;
  std::filesystem::path output_dir = "out";

  // [tariff]
  double nominal_price = 0.172;             // $/kWh
  double nominal_connection_charge = 0.53;  // $/day
  std::optional<double> fixed_cost;         // F; derived from the nominal tariff when absent
  std::vector<std::string> families = {"optimal-two-part",     "flat-fixed-A=0.53",    "flat-zero-A",
                                       "dynamic-fixed-A=0.53", "dynamic-fixed-A=0.86", "dynamic-fixed-A=2.19"};
  std::vector<double> pareto_f_factors = {0.8, 0.9, 1.0, 1.1, 1.2, 1.3, 1.4};

  // [der]
  double pv_unit_kw = 5.0;
  double storage_ratio = 0.5;  // kWh per kW of PV
  double storage_kwh = 6.4;
  double storage_kw = 3.3;
  double storage_efficiency = 0.96;
  AllocationRule allocation = AllocationRule::largest_first;
  double solar_system_kw = 5.0;  // rating of the system in the solar file
  std::vector<double> capacity_grid_kw = {0, 275e3, 550e3, 825e3, 1.1e6, 1.375e6, 1.65e6, 1.925e6, 2.2e6};
  std::vector<double> xsub_capacity_grid_kw = {0, 0.55e6, 1.1e6, 1.65e6, 2.2e6};

  // [data], resolved against the config file's directory
  std::filesystem::path prices_path = "prices.csv";
  std::filesystem::path load_path = "load.csv";
  std::filesystem::path solar_path = "solar.csv";

  // [demand]
  std::optional<Matrix> slope_override;

  DerOptions der_options() const;
  std::vector<TariffFamily> parsed_families() const;
  /// Throws ValidationError naming the first bad field.
  void validate() const;
};

struct LoadedConfig {
  StudyConfig config;
  /// SHA-256 of the canonical (key-sorted) JSON document.
  std::string digest;
};

/// Reads a two-level JSON document (sections, then keys). Unknown sections or
/// keys are errors. Relative paths are resolved against the file's directory.
LoadedConfig load_config(const std::filesystem::path& path);

/// Parses a config document given as text; `base_dir` resolves data paths.
LoadedConfig parse_config(const std::string& text, const std::filesystem::path& base_dir);

/// Days in ascending date order, one N-vector per day.
struct DaySeries {
  std::vector<std::string> dates;
  std::vector<Vector> values;
};

/// `date,period_index,price_usd_per_mwh`; values are returned in $/kWh.
DaySeries load_prices(const std::filesystem::path& path, int horizon);

enum class ProfileKind { load, solar };

/// `date,period_index,kwh`. Solar values must be nonnegative and are divided
/// by `system_kw` to give output per kW installed.
DaySeries load_profile(const std::filesystem::path& path, ProfileKind kind, int horizon, double system_kw = 1.0);

/// Aggregate load per period averaged over the days.
Vector mean_profile(const DaySeries& series);

/// Demand model calibrated to the mean load at the nominal flat price.
DemandModel build_model(const StudyConfig& config, const DaySeries& load);

/// Equiprobable day scenarios. Disturbances split each day's deviation from
/// the mean load across classes in proportion to σ_c. Product mode returns
/// split_marginals of the paired set.
ScenarioSet build_scenarios(const StudyConfig& config, const DemandModel& model, const DaySeries& prices,
                            const DaySeries& load, const DaySeries& solar);

/// Expected retailer surplus of the nominal flat tariff without DER.
double derive_F(const StudyConfig& config, const DemandModel& model, const ScenarioSet& set);

struct Study {
  StudyConfig config;
  std::string config_digest;
  /// Input file name → SHA-256 of its bytes.
  std::map<std::string, std::string> input_digests;
  DemandModel model;
  ScenarioSet scenarios;
  double F;
};

Study load_study(const std::filesystem::path& config_path);

std::string sha256_hex(const std::string& bytes);
std::string read_file(const std::filesystem::path& path);

}  // namespace dertariff
