#include "dertariff/storage.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "dertariff/errors.hpp"
#include "dertariff/lp.hpp"

namespace dertariff {

StorageSpec StorageSpec::idealized(double capacity_kwh) {
  StorageSpec spec;
  spec.capacity_kwh = capacity_kwh;
  return spec;
}

StorageSpec StorageSpec::powerwall() {
  StorageSpec spec;
  spec.capacity_kwh = 6.4;
  spec.charge_rate_kw = 3.3;
  spec.discharge_rate_kw = 3.3;
  spec.efficiency = 0.96;
  return spec;
}

StorageSpec StorageSpec::scaled(double factor) const {
  if (!(factor >= 0.0) || !std::isfinite(factor)) throw ValidationError("storage scale factor must be finite and >= 0");
  StorageSpec out = *this;
  out.capacity_kwh *= factor;
  out.charge_rate_kw *= factor;
  out.discharge_rate_kw *= factor;
  out.initial_charge_kwh *= factor;
  return out;
}

void StorageSpec::validate() const {
  if (!(capacity_kwh >= 0.0) || !std::isfinite(capacity_kwh))
    throw ValidationError("storage capacity must be finite and >= 0");
  if (!(charge_rate_kw >= 0.0) || !(discharge_rate_kw >= 0.0))
    throw ValidationError("storage rates must be >= 0");
  if (!(efficiency > 0.0 && efficiency <= 1.0)) throw ValidationError("storage efficiency must lie in (0, 1]");
  if (!(initial_charge_kwh >= 0.0 && initial_charge_kwh <= capacity_kwh))
    throw ValidationError("initial charge must lie in [0, capacity]");
  if (!(period_hours > 0.0) || !std::isfinite(period_hours)) throw ValidationError("period length must be positive");
}

ArbitrageResult arbitrage_value(const StorageSpec& spec, const PriceVector& pi) {
  spec.validate();
  if (!pi.allFinite()) throw ValidationError("storage price vector has non-finite entries");
  const Eigen::Index n = pi.size();

  ArbitrageResult result;
  result.schedule.discharge = Vector::Zero(n);
  result.schedule.state_of_charge = Vector::Constant(n + 1, spec.initial_charge_kwh);
  if (spec.capacity_kwh == 0.0) return result;

  // x = (c_0..c_{n-1}, d_0..d_{n-1}), both meter-side kWh.
  const double eta = spec.efficiency;
  const double soc0 = spec.initial_charge_kwh;
  lp::LinearProgram prog(2 * n);
  Vector objective(2 * n);
  objective << -pi, pi;
  prog.set_objective(objective);

  Vector cumulative = Vector::Zero(2 * n);
  for (Eigen::Index k = 0; k < n; ++k) {
    cumulative(k) = eta;
    cumulative(n + k) = -1.0 / eta;
    prog.add_constraint(cumulative, lp::Sense::less_equal, spec.capacity_kwh - soc0);
    prog.add_constraint(-cumulative, lp::Sense::less_equal, soc0);
  }
  if (spec.cyclic) prog.add_constraint(cumulative, lp::Sense::equal, 0.0);

  // Per-period throughput never exceeds one full swing. Without this cap a
  // lossy battery at a negative price could charge and discharge at once
  // without bound.
  const double charge_cap = std::min(spec.charge_rate_kw * spec.period_hours, spec.capacity_kwh / eta);
  const double discharge_cap = std::min(spec.discharge_rate_kw * spec.period_hours, spec.capacity_kwh * eta);
  for (Eigen::Index t = 0; t < n; ++t) {
    Vector row = Vector::Zero(2 * n);
    row(t) = 1.0;
    prog.add_constraint(row, lp::Sense::less_equal, charge_cap);
    row(t) = 0.0;
    row(n + t) = 1.0;
    prog.add_constraint(std::move(row), lp::Sense::less_equal, discharge_cap);
  }

  const lp::Result sol = prog.maximize();
  if (sol.status != lp::Status::optimal)
    throw std::logic_error("storage LP did not reach an optimum (the zero schedule is always feasible)");

  double soc = soc0;
  for (Eigen::Index t = 0; t < n; ++t) {
    const double c = sol.x(t);
    const double d = sol.x(n + t);
    result.schedule.discharge(t) = d - c;
    soc += eta * c - d / eta;
    result.schedule.state_of_charge(t + 1) = std::clamp(soc, 0.0, spec.capacity_kwh);
  }
  result.value = pi.dot(result.schedule.discharge);
  return result;
}

double brute_force_value(const StorageSpec& spec, const PriceVector& pi, int grid_steps) {
  spec.validate();
  if (grid_steps < 2) throw std::invalid_argument("grid_steps must be at least 2");
  const Eigen::Index n = pi.size();
  if (n > kBruteForceHorizonCap)
    throw std::invalid_argument("brute-force storage horizon " + std::to_string(n) + " exceeds cap " +
                                std::to_string(kBruteForceHorizonCap));
  if (spec.capacity_kwh == 0.0) return 0.0;

  std::vector<double> levels;
  for (int k = 0; k <= grid_steps; ++k) levels.push_back(spec.capacity_kwh * k / grid_steps);
  levels.push_back(spec.initial_charge_kwh);
  std::sort(levels.begin(), levels.end());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
  const std::size_t L = levels.size();
  const std::size_t start =
      static_cast<std::size_t>(std::find(levels.begin(), levels.end(), spec.initial_charge_kwh) - levels.begin());

  const double eta = spec.efficiency;
  const double charge_cap = spec.charge_rate_kw * spec.period_hours;
  const double discharge_cap = spec.discharge_rate_kw * spec.period_hours;
  const double slack = 1e-12 * std::max(1.0, spec.capacity_kwh);
  const double neg_inf = -std::numeric_limits<double>::infinity();

  // value[j]: best revenue from period t onward when holding levels[j].
  std::vector<double> value(L, neg_inf);
  if (spec.cyclic)
    value[start] = 0.0;
  else
    std::fill(value.begin(), value.end(), 0.0);

  for (Eigen::Index t = n - 1; t >= 0; --t) {
    std::vector<double> prev(L, neg_inf);
    for (std::size_t a = 0; a < L; ++a) {
      for (std::size_t b = 0; b < L; ++b) {
        if (value[b] == neg_inf) continue;
        double s = 0.0;
        if (levels[b] > levels[a]) {
          const double drawn = (levels[b] - levels[a]) / eta;
          if (drawn > charge_cap + slack) continue;
          s = -drawn;
        } else if (levels[b] < levels[a]) {
          const double delivered = (levels[a] - levels[b]) * eta;
          if (delivered > discharge_cap + slack) continue;
          s = delivered;
        }
        prev[a] = std::max(prev[a], pi(t) * s + value[b]);
      }
    }
    value = std::move(prev);
  }
  return value[start] == neg_inf ? 0.0 : value[start];
}

double fleet_value(std::span<const StorageSpec> specs, const PriceVector& pi) {
  double total = 0.0;
  for (const auto& spec : specs) total += arbitrage_value(spec, pi).value;
  return total;
}

}  // namespace dertariff
