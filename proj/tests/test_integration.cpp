#include <doctest.h>

#include "dertariff/errors.hpp"
#include "dertariff/integration.hpp"
#include "fixtures.hpp"

using namespace dertariff;

namespace {

double owners(const IntegrationCase& c, std::size_t class_id) {
  double n = 0.0;
  for (const auto& g : c.groups)
    if (g.class_id == class_id && g.pv_kw > 0.0) n += g.count;
  return n;
}

}  // namespace

TEST_CASE("mode names round-trip") {
  for (IntegrationMode m : {IntegrationMode::none, IntegrationMode::decentralized, IntegrationMode::centralized})
    CHECK(parse_integration_mode(to_string(m)) == m);
  CHECK_THROWS_AS(parse_integration_mode("hybrid"), ValidationError);
  CHECK(parse_allocation_rule("proportional") == AllocationRule::proportional);
  CHECK_THROWS_AS(parse_allocation_rule("random"), ValidationError);
}

TEST_CASE("largest-sigma classes receive systems first") {
  std::mt19937_64 rng(31);
  const DemandModel m = fixtures::random_model(rng, 4, 3, 100.0);
  DerOptions opt;
  const IntegrationCase c = make_der_case(m, IntegrationMode::decentralized, 150 * 5.0, opt);
  CHECK(owners(c, 2) == 100.0);
  CHECK(owners(c, 1) == 50.0);
  CHECK(owners(c, 0) == 0.0);
  for (const auto& g : c.groups) {
    if (g.pv_kw > 0.0) {
      REQUIRE(g.storage);
      CHECK(g.storage->capacity_kwh == doctest::Approx(2.5));
      CHECK(g.storage->charge_rate_kw == doctest::Approx(3.3 * 2.5 / 6.4));
    } else {
      CHECK_FALSE(g.storage);
    }
  }
  const auto eff = c.effective_groups(m);
  double total = 0.0;
  for (const auto& g : eff) total += g.count;
  CHECK(total == doctest::Approx(300.0));

  // Partial units are dropped.
  CHECK(owners(make_der_case(m, IntegrationMode::decentralized, 12.0, opt), 2) == 2.0);
  CHECK_THROWS_AS(make_der_case(m, IntegrationMode::decentralized, 301 * 5.0, opt), ValidationError);
}

TEST_CASE("proportional allocation and zero storage ratio") {
  std::mt19937_64 rng(32);
  const DemandModel m = fixtures::random_model(rng, 4, 2, 100.0);
  DerOptions opt;
  opt.allocation = AllocationRule::proportional;
  opt.storage_ratio = 0.0;
  const IntegrationCase c = make_der_case(m, IntegrationMode::decentralized, 100 * 5.0, opt);
  CHECK(owners(c, 0) == doctest::Approx(50.0));
  CHECK(owners(c, 1) == doctest::Approx(50.0));
  for (const auto& g : c.groups) CHECK_FALSE(g.storage);
}

TEST_CASE("centralized case holds everything at the retailer") {
  std::mt19937_64 rng(33);
  const DemandModel m = fixtures::random_model(rng, 4, 2);
  const IntegrationCase c = make_der_case(m, IntegrationMode::centralized, 1000.0, DerOptions{});
  CHECK(c.groups.empty());
  CHECK(c.active_retailer_pv_kw() == 1000.0);
  REQUIRE(c.active_retailer_storage());
  CHECK(c.active_retailer_storage()->capacity_kwh == doctest::Approx(500.0));
  const auto eff = c.effective_groups(m);
  REQUIRE(eff.size() == 2);
  for (const auto& g : eff) CHECK(g.pv_kw == 0.0);

  // Customer equipment is inactive outside decentralized mode.
  IntegrationCase none = make_der_case(m, IntegrationMode::decentralized, 50.0, DerOptions{});
  none.mode = IntegrationMode::none;
  for (const auto& g : none.effective_groups(m)) {
    CHECK(g.pv_kw == 0.0);
    CHECK_FALSE(g.storage);
  }
  CHECK(none.active_retailer_pv_kw() == 0.0);
}

TEST_CASE("group counts must cover each class") {
  std::mt19937_64 rng(34);
  const DemandModel m = fixtures::random_model(rng, 4, 2, 100.0);
  IntegrationCase c;
  c.mode = IntegrationMode::decentralized;
  c.groups = {{0, 100.0, 5.0, std::nullopt}, {1, 60.0, 0.0, std::nullopt}};
  CHECK_THROWS_AS(c.effective_groups(m), ValidationError);
  c.groups.push_back({1, 40.0, 5.0, StorageSpec::idealized(1.0)});
  CHECK(c.effective_groups(m).size() == 3);
  c.groups.push_back({7, 0.0, 0.0, std::nullopt});
  CHECK_THROWS_AS(c.effective_groups(m), ValidationError);
}
