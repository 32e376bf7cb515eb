#include <doctest.h>

#include "fixtures.hpp"
#include "oracle.hpp"

using namespace dertariff;

// The oracles are only useful if they are right on cases small enough to do
// by hand.

TEST_CASE("lattice DP on hand cases") {
  PriceVector pi(3);
  pi << 1, 3, 2;
  CHECK(oracle::dp_storage_value(StorageSpec::idealized(1.0), pi, 2) == doctest::Approx(2.0));
  StorageSpec half = StorageSpec::idealized(1.0);
  half.charge_rate_kw = 0.5;
  CHECK(oracle::dp_storage_value(half, pi, 2) == doctest::Approx(1.0));
  CHECK(oracle::dp_storage_value(half, pi, 1) == doctest::Approx(0.0));
  CHECK_THROWS_AS(oracle::dp_storage_value(half, PriceVector::Ones(7), 2), std::length_error);
  StorageSpec off = StorageSpec::idealized(1.0);
  off.initial_charge_kwh = 0.3;
  CHECK_THROWS_AS(oracle::dp_storage_value(off, pi, 2), std::invalid_argument);
}

TEST_CASE("matrix helpers") {
  Matrix m(3, 3);
  m << 0, 2, 1, 1, 1, 0, 3, 0, 1;
  const Matrix inv = oracle::gauss_jordan_inverse(m);
  CHECK((m * inv - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK_THROWS_AS(oracle::gauss_jordan_inverse(Matrix::Ones(2, 2)), std::domain_error);

  Matrix s(2, 2);
  s << 2, 1, 1, 2;
  const auto eig = oracle::jacobi_eigenvalues(s);
  CHECK(eig[0] == doctest::Approx(1.0));
  CHECK(eig[1] == doctest::Approx(3.0));
}

TEST_CASE("pairwise covariance on two points") {
  Scenario a, b;
  a.probability = 0.25;
  b.probability = 0.75;
  a.lambda = Vector::Constant(1, 0.0);
  b.lambda = Vector::Constant(1, 4.0);
  for (Scenario* s : {&a, &b}) {
    s->disturbances = {Vector::Zero(1)};
    s->renewable_customer = {Vector::Zero(1)};
    s->renewable_retailer = Vector::Zero(1);
  }
  const ScenarioSet set(1, {a, b});
  const auto lam = [](const Scenario& s) -> Vector { return s.lambda; };
  // Var = p(1−p)·16 = 3.
  CHECK(oracle::pairwise_cov_trace(set, lam, lam) == doctest::Approx(3.0));
}

TEST_CASE("re-simulation of a single customer by hand") {
  // One class, one customer, N = 1, B = 1, b0 = 2, σ = 1: D = 2 − π.
  const DemandModel m({1.0}, Vector::Constant(1, 2.0), Matrix::Identity(1, 1), PriceVector::Ones(1), {1.0});
  Scenario s;
  s.probability = 1.0;
  s.lambda = Vector::Constant(1, 0.5);
  s.disturbances = {Vector::Zero(1)};
  s.renewable_customer = {Vector::Constant(1, 0.2)};
  s.renewable_retailer = Vector::Zero(1);
  const ScenarioSet set(1, {s});
  IntegrationCase c;
  c.mode = IntegrationMode::decentralized;
  c.groups = {{0, 1.0, 1.0, std::nullopt}};
  const TwoPartTariff t{0.1, PriceVector::Constant(1, 1.0), std::nullopt};
  const SurplusReport r = oracle::settlement_resim(t, m, set, c);
  // q = 1, S(1) = 2 − ½ = 1.5, bill = 0.1 + 1·(1 − 0.2) = 0.9, cost = 0.5·0.8.
  CHECK(r.cs == doctest::Approx(0.6));
  CHECK(r.rs == doctest::Approx(0.5));
  CHECK(oracle::root_find_connection_charge(t, m, set, c, 1.0) == doctest::Approx(0.6));
  CHECK(oracle::fd_total_elasticity(m, PriceVector::Ones(1)) == doctest::Approx(-1.0).epsilon(1e-6));
}

TEST_CASE("planner oracle refuses oversized problems") {
  std::mt19937_64 rng(5);
  const DemandModel m = fixtures::random_model(rng, 7, 1);
  const ScenarioSet set = fixtures::random_set(rng, 7, 1, 2);
  CHECK_THROWS_AS(oracle::planner_direct(m, set, IntegrationCase{}), std::length_error);
  const DemandModel small = fixtures::random_model(rng, 3, 1);
  const ScenarioSet many = fixtures::random_set(rng, 3, 1, 17);
  CHECK_THROWS_AS(oracle::planner_direct(small, many, IntegrationCase{}), std::length_error);
}
