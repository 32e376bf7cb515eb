#pragma once

#include <cstdint>
#include <filesystem>

namespace dertariff {

struct SyntheticOptions {
  std::uint64_t seed = 20240601;
  int days = 20;
  int horizon = 24;
  double customers = 2.2e6;
  double kwh_per_customer_day = 16.0;
  double solar_system_kw = 5.0;
  /// Share one daily heat factor across price, load and solar.
  bool correlated = false;
};

/// Writes prices.csv, load.csv, solar.csv and study.json into `dir`.
/// Output depends only on the options.
void write_synthetic_dataset(const std::filesystem::path& dir, const SyntheticOptions& options);

}  // namespace dertariff
