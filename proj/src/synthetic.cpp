#include "dertariff/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "dertariff/errors.hpp"

namespace dertariff {

namespace {

// std::*_distribution output is implementation-defined; these are not.
class Draws {
 public:
  explicit Draws(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * M_PI * u2);
    has_spare_ = true;
    return r * std::cos(2.0 * M_PI * u2);
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

double bump(double t, double center, double width) {
  const double z = (t - center) / width;
  return std::exp(-0.5 * z * z);
}

std::string date_of(int day) {
  // Consecutive days from 1 June; the dataset never spans more than 3 months.
  static const int lengths[] = {30, 31, 31, 30};
  int month = 6;
  int d = day;
  for (int m = 0; m < 4 && d >= lengths[m]; ++m) {
    d -= lengths[m];
    ++month;
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "2023-%02d-%02d", month, d + 1);
  return buf;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

void write_synthetic_dataset(const std::filesystem::path& dir, const SyntheticOptions& options) {
  if (options.days < 1 || options.days > 120) throw ValidationError("synthetic days must lie in [1, 120]");
  if (options.horizon < 1) throw ValidationError("synthetic horizon must be >= 1");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  const int n = options.horizon;
  const double hours = 24.0 / n;

  std::vector<double> load_shape(static_cast<std::size_t>(n));
  double shape_sum = 0.0;
  for (int t = 0; t < n; ++t) {
    const double h = (t + 0.5) * hours;
    load_shape[t] = 0.45 + 0.15 * bump(h, 8.0, 1.5) + 0.45 * bump(h, 19.0, 3.0);
    shape_sum += load_shape[t];
  }

  Draws price_draws(options.seed);
  Draws load_draws(options.seed ^ 0x9e3779b97f4a7c15ULL);
  Draws solar_draws(options.seed ^ 0xc2b2ae3d27d4eb4fULL);
  Draws heat_draws(options.seed ^ 0x165667b19e3779f9ULL);

  auto prices = open_out(dir / "prices.csv");
  auto load = open_out(dir / "load.csv");
  auto solar = open_out(dir / "solar.csv");
  prices << "date,period_index,price_usd_per_mwh\n";
  load << "date,period_index,kwh\n";
  solar << "date,period_index,kwh\n";

  for (int day = 0; day < options.days; ++day) {
    const std::string date = date_of(day);
    const double heat = heat_draws.normal();
    const double price_level = 1.0 + 0.15 * (options.correlated ? heat : price_draws.normal());
    const double load_level = 1.0 + 0.08 * (options.correlated ? heat : load_draws.normal());
    const double clear_noise = options.correlated ? 0.5 * heat + 0.5 * solar_draws.normal() : solar_draws.normal();
    const double clearness = std::clamp(0.8 + 0.15 * clear_noise, 0.3, 1.0);

    for (int t = 0; t < n; ++t) {
      const double h = (t + 0.5) * hours;
      const double mwh_price =
          std::max(5.0, price_level * (35.0 + 30.0 * bump(h, 17.0, 2.5)) + 3.0 * price_draws.normal());
      const double per_customer = options.kwh_per_customer_day * load_shape[t] / shape_sum;
      const double kwh = options.customers * per_customer * load_level * (1.0 + 0.03 * load_draws.normal());
      const double pv = (h > 6.0 && h < 20.0) ? options.solar_system_kw * 0.75 * bump(h, 13.0, 2.5) * clearness : 0.0;

      prices << date << ',' << t << ',' << fmt(mwh_price) << '\n';
      load << date << ',' << t << ',' << fmt(kwh) << '\n';
      solar << date << ',' << t << ',' << fmt(pv) << '\n';
    }
  }

  auto study = open_out(dir / "study.json");
  char customers[32];
  std::snprintf(customers, sizeof customers, "%.12g", options.customers);
  char system_kw[32];
  std::snprintf(system_kw, sizeof system_kw, "%.12g", options.solar_system_kw);
  study << "{\n"
        << "  \"study\": {\"horizon\": " << n << ", \"customers\": " << customers
        << ", \"classes\": 5, \"sigma_rule\": \"linear\", \"elasticity\": -0.3, \"scenario_mode\": \"paired\", "
           "\"output_dir\": \"out\"},\n"
        << "  \"tariff\": {\"nominal_price\": 0.172, \"nominal_connection_charge\": 0.53},\n"
        << "  \"der\": {\"pv_unit_kw\": 5, \"storage_ratio\": 0.5, \"solar_system_kw\": " << system_kw << "},\n"
        << "  \"data\": {\"prices\": \"prices.csv\", \"load\": \"load.csv\", \"solar\": \"solar.csv\"}\n"
        << "}\n";
  if (!prices || !load || !solar || !study) throw IoError("failed writing synthetic dataset to " + dir.string());
}

}  // namespace dertariff
