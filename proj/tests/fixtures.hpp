#pragma once

#include <random>
#include <vector>

#include "dertariff/demand.hpp"
#include "dertariff/ingest.hpp"
#include "dertariff/scenario.hpp"

namespace fixtures {

using dertariff::Scenario;
using dertariff::ScenarioSet;
using dertariff::Vector;

inline Vector random_vector(std::mt19937_64& rng, Eigen::Index n, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = u(rng);
  return v;
}

/// Random weights, prices around 0.05 $/kWh, small disturbances and solar.
inline ScenarioSet random_set(std::mt19937_64& rng, Eigen::Index n, std::size_t classes, std::size_t count,
                              bool renewables = true) {
  std::vector<double> w(count);
  std::uniform_real_distribution<double> u(0.2, 1.0);
  double sum = 0.0;
  for (auto& x : w) sum += (x = u(rng));
  std::vector<Scenario> scen;
  for (std::size_t k = 0; k < count; ++k) {
    Scenario s;
    s.probability = w[k] / sum;
    s.lambda = random_vector(rng, n, 0.02, 0.12);
    for (std::size_t c = 0; c < classes; ++c) {
      s.disturbances.push_back(random_vector(rng, n, -0.05, 0.05) * double(c + 1));
      s.renewable_customer.push_back(renewables ? random_vector(rng, n, 0.0, 0.8) : Vector(Vector::Zero(n)));
    }
    s.renewable_retailer = renewables ? random_vector(rng, n, 0.0, 0.8) : Vector(Vector::Zero(n));
    scen.push_back(std::move(s));
  }
  // Renormalize exactly through the last weight.
  double head = 0.0;
  for (std::size_t k = 0; k + 1 < count; ++k) head += scen[k].probability;
  scen.back().probability = 1.0 - head;
  return ScenarioSet(n, std::move(scen));
}

/// Linear-σ model calibrated to random hourly sales at a flat price.
inline dertariff::DemandModel random_model(std::mt19937_64& rng, Eigen::Index n, std::size_t classes,
                                           double customers_per_class = 100.0) {
  const Vector sales = random_vector(rng, n, 0.5, 1.5) * customers_per_class * classes;
  return dertariff::calibrate(sales, Vector::Constant(n, 0.172), -0.3,
                              std::vector<double>(classes, customers_per_class), dertariff::SigmaRule::linear);
}

inline const dertariff::Study& synthetic_study() {
  static const dertariff::Study study = dertariff::load_study(DATA_DIR "/synthetic/study.json");
  return study;
}

inline const dertariff::Study& correlated_study() {
  static const dertariff::Study study = dertariff::load_study(DATA_DIR "/synthetic-correlated/study.json");
  return study;
}

inline double rel(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300}); }

}  // namespace fixtures
