#include <doctest.h>

#include "dertariff/errors.hpp"
#include "dertariff/scenario.hpp"
#include "fixtures.hpp"
#include "oracle.hpp"

using namespace dertariff;

namespace {

Scenario make(double p, std::initializer_list<double> lambda, double d = 0.0) {
  Scenario s;
  s.probability = p;
  s.lambda = Vector(static_cast<Eigen::Index>(lambda.size()));
  Eigen::Index i = 0;
  for (double x : lambda) s.lambda(i++) = x;
  const Eigen::Index n = s.lambda.size();
  s.disturbances = {Vector::Constant(n, d)};
  s.renewable_customer = {Vector::Zero(n)};
  s.renewable_retailer = Vector::Zero(n);
  return s;
}

const auto price = [](const Scenario& s) -> Vector { return s.lambda; };

}  // namespace

TEST_CASE("expected price") {
  CHECK(expect_price(ScenarioSet(2, {make(1.0, {2, 3})})) == Vector((Vector(2) << 2, 3).finished()));
  const ScenarioSet two(2, {make(0.5, {0, 0}), make(0.5, {2, 4})});
  CHECK(expect_price(two).isApprox((Vector(2) << 1, 2).finished()));

  std::mt19937_64 rng(7);
  const ScenarioSet set = fixtures::random_set(rng, 5, 2, 10);
  long double acc[5] = {};
  for (const auto& s : set.scenarios())
    for (int t = 0; t < 5; ++t) acc[t] += static_cast<long double>(s.probability) * s.lambda(t);
  const Vector mean = expect_price(set);
  for (int t = 0; t < 5; ++t) CHECK(std::abs(mean(t) - static_cast<double>(acc[t])) <= 1e-14);
}

TEST_CASE("expectation is linear") {
  std::mt19937_64 rng(8);
  const ScenarioSet set = fixtures::random_set(rng, 4, 1, 6);
  const Vector direct = expect(set, [](const Scenario& s) -> Vector { return 3.0 * s.lambda + Vector::Constant(4, 0.5); });
  CHECK((direct - (3.0 * expect_price(set) + Vector::Constant(4, 0.5))).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("covariance trace") {
  const ScenarioSet two(2, {make(0.5, {0, 0}), make(0.5, {2, 2})});
  CHECK(cov_trace(two, price, price) == doctest::Approx(2.0));
  CHECK(cov_trace(two, price, [](const Scenario&) -> Vector { return Vector::Ones(2); }) == 0.0);

  std::mt19937_64 rng(9);
  const ScenarioSet set = fixtures::random_set(rng, 6, 2, 5);
  const auto dist = [](const Scenario& s) -> Vector { return s.disturbances[1]; };
  const double fast = cov_trace(set, price, dist);
  CHECK(std::abs(fast - oracle::pairwise_cov_trace(set, price, dist)) <= 1e-12);
  const double moments = expect_scalar(set, [&](const Scenario& s) { return s.lambda.dot(dist(s)); }) -
                         expect_price(set).dot(expect(set, dist));
  CHECK(fixtures::rel(fast, moments) <= 1e-10);
}

TEST_CASE("scenario set validation") {
  CHECK_THROWS_AS(ScenarioSet(2, {}), ValidationError);
  CHECK_THROWS_AS(ScenarioSet(2, {make(0.5, {1, 2})}), ValidationError);
  CHECK_THROWS_AS(ScenarioSet(3, {make(1.0, {1, 2})}), ValidationError);
  Scenario neg = make(1.0, {1, 2});
  neg.renewable_retailer(0) = -1.0;
  CHECK_THROWS_AS(ScenarioSet(2, {neg}), ValidationError);
  Scenario nan = make(1.0, {1, NAN});
  CHECK_THROWS_AS(ScenarioSet(2, {nan}), ValidationError);
  CHECK_NOTHROW(ScenarioSet(2, {make(1.0, {-5, 2})}));
}

TEST_CASE("product of marginals") {
  // Perfectly correlated pair → four cells of weight ¼.
  const ScenarioSet corr(1, {make(0.5, {1}, 0.0), make(0.5, {3}, 1.0)});
  const ScenarioSet prod = split_marginals(corr);
  REQUIRE(prod.size() == 4);
  CHECK(prod.independent());
  for (const auto& s : prod.scenarios()) CHECK(s.probability == doctest::Approx(0.25));

  // Already a product: same distribution.
  const ScenarioSet again = split_marginals(prod);
  REQUIRE(again.size() == 4);
  for (std::size_t k = 0; k < 4; ++k) {
    CHECK(std::abs(again[k].probability - prod[k].probability) <= 1e-12);
    CHECK(again[k].lambda == prod[k].lambda);
  }

  // Marginals preserved, and λ uncorrelated with local-state quantities.
  std::mt19937_64 rng(10);
  const ScenarioSet set = fixtures::random_set(rng, 3, 2, 4);
  const ScenarioSet p = split_marginals(set);
  CHECK(p.size() == 16);
  CHECK((expect_price(p) - expect_price(set)).cwiseAbs().maxCoeff() <= 1e-12);
  const auto sol = [](const Scenario& s) -> Vector { return s.renewable_customer[0]; };
  CHECK((expect(p, sol) - expect(set, sol)).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(std::abs(cov_trace(p, price, sol)) <= 1e-10);
  CHECK(std::abs(cov_trace(p, price, [](const Scenario& s) -> Vector { return s.disturbances[1]; })) <= 1e-10);
}
