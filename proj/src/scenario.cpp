#include "dertariff/scenario.hpp"

#include <bit>
#include <cmath>
#include <map>
#include <string>

#include "dertariff/errors.hpp"

namespace dertariff {

namespace {

void check_vector(const Vector& v, Eigen::Index n, const std::string& what, bool nonnegative) {
  if (v.size() != n)
    throw ValidationError(what + " has length " + std::to_string(v.size()) + ", expected " + std::to_string(n));
  if (!v.allFinite()) throw ValidationError(what + " has non-finite entries");
  if (nonnegative && (v.array() < 0.0).any()) throw ValidationError(what + " has negative entries");
}

void append_key(std::vector<std::uint64_t>& key, const Vector& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) key.push_back(std::bit_cast<std::uint64_t>(v(i)));
}

std::vector<std::uint64_t> omega_key(const Scenario& s) {
  std::vector<std::uint64_t> key;
  for (const auto& d : s.disturbances) append_key(key, d);
  for (const auto& r : s.renewable_customer) append_key(key, r);
  append_key(key, s.renewable_retailer);
  return key;
}

template <class Key>
struct Support {
  std::map<Key, std::size_t> index;
  std::vector<std::size_t> representative;  // scenario index of first occurrence
  std::vector<double> weight;

  void add(const Key& key, std::size_t scenario, double p) {
    auto [it, inserted] = index.emplace(key, representative.size());
    if (inserted) {
      representative.push_back(scenario);
      weight.push_back(0.0);
    }
    weight[it->second] += p;
  }
};

}  // namespace

std::vector<std::uint64_t> bit_key(const Vector& v) {
  std::vector<std::uint64_t> key;
  append_key(key, v);
  return key;
}

ScenarioSet::ScenarioSet(Eigen::Index horizon, std::vector<Scenario> scenarios, bool independent)
    : horizon_(horizon), num_classes_(0), scenarios_(std::move(scenarios)), independent_(independent) {
  if (horizon_ < 1) throw ValidationError("horizon must be at least 1");
  if (scenarios_.empty()) throw ValidationError("scenario set is empty");
  num_classes_ = scenarios_.front().disturbances.size();

  // Neumaier-compensated sum of the weights.
  double sum = 0.0;
  double carry = 0.0;
  for (std::size_t k = 0; k < scenarios_.size(); ++k) {
    const Scenario& s = scenarios_[k];
    const std::string tag = "scenario " + std::to_string(k);
    if (!(s.probability >= 0.0 && s.probability <= 1.0)) throw ValidationError(tag + ": probability outside [0,1]");
    check_vector(s.lambda, horizon_, tag + " price", false);
    if (s.disturbances.size() != num_classes_ || s.renewable_customer.size() != num_classes_)
      throw ValidationError(tag + ": inconsistent number of customer classes");
    for (std::size_t c = 0; c < num_classes_; ++c) {
      check_vector(s.disturbances[c], horizon_, tag + " disturbance", false);
      check_vector(s.renewable_customer[c], horizon_, tag + " customer renewable", true);
    }
    check_vector(s.renewable_retailer, horizon_, tag + " retailer renewable", true);

    const double t = sum + s.probability;
    carry += std::abs(sum) >= std::abs(s.probability) ? (sum - t) + s.probability : (s.probability - t) + sum;
    sum = t;
  }
  if (std::abs(sum + carry - 1.0) > 1e-12) throw ValidationError("scenario probabilities do not sum to 1");
}

PriceVector expect_price(const ScenarioSet& set) {
  return expect(set, [](const Scenario& s) -> const Vector& { return s.lambda; });
}

ScenarioSet split_marginals(const ScenarioSet& set) {
  Support<std::vector<std::uint64_t>> prices;
  Support<std::vector<std::uint64_t>> states;
  const auto& scen = set.scenarios();
  for (std::size_t k = 0; k < scen.size(); ++k) {
    prices.add(bit_key(scen[k].lambda), k, scen[k].probability);
    states.add(omega_key(scen[k]), k, scen[k].probability);
  }

  std::vector<Scenario> product;
  product.reserve(prices.weight.size() * states.weight.size());
  for (std::size_t i = 0; i < prices.weight.size(); ++i) {
    for (std::size_t j = 0; j < states.weight.size(); ++j) {
      Scenario s = scen[states.representative[j]];
      s.lambda = scen[prices.representative[i]].lambda;
      s.probability = prices.weight[i] * states.weight[j];
      product.push_back(std::move(s));
    }
  }
  return ScenarioSet(set.horizon(), std::move(product), true);
}

}  // namespace dertariff
