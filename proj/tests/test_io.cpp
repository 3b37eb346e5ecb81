#include <sstream>

#include "doctest.h"
#include "egpd/csv.hpp"
#include "egpd/harness.hpp"
#include "egpd/scenario_io.hpp"

using namespace egpd;

namespace {

void check_same(const Scenario& a, const Scenario& b) {
  CHECK(a.name == b.name);
  CHECK(a.items == b.items);
  REQUIRE(a.matchings.size() == b.matchings.size());
  for (std::size_t j = 0; j < a.matchings.size(); ++j) {
    CHECK(a.matchings[j].mu == b.matchings[j].mu);
    CHECK(a.matchings[j].reward == b.matchings[j].reward);
    CHECK(a.matchings[j].label == b.matchings[j].label);
  }
  CHECK(a.arrivals.mean() == b.arrivals.mean());
  CHECK(a.m == b.m);
  CHECK(a.beta == b.beta);
  CHECK(a.gamma == b.gamma);
  CHECK(a.holding_costs == b.holding_costs);
  CHECK(a.horizon == b.horizon);
  CHECK(a.seed == b.seed);
  CHECK(a.completion_policy == b.completion_policy);
  CHECK(a.completion_scan == b.completion_scan);
  CHECK(a.rate_changes.size() == b.rate_changes.size());
}

}  // namespace

TEST_CASE("dump and parse round trip") {
  for (const Scenario& s : {experiment_a(), experiment_c(), bipartite_scenario()}) {
    CAPTURE(s.name);
    const std::string text = dump_scenario(s);
    const Scenario back = parse_scenario(text);
    check_same(s, back);
    CHECK(dump_scenario(back) == text);
  }
}

TEST_CASE("utility kinds round trip") {
  Scenario s = experiment_a();
  s.utility = UtilitySpec::weighted_linear({1, 2, 3, 4, 5, 6, 7, 8}, 0.5);
  CHECK(parse_scenario(dump_scenario(s)).utility.linear_coefficients(8) == Vec{1, 2, 3, 4, 5, 6, 7, 8});
  s.utility = UtilitySpec::log_sum(Vec(8, 1.0), Vec(8, 2.0));
  const Scenario back = parse_scenario(dump_scenario(s));
  CHECK(back.utility.name() == "log-sum");
  CHECK(back.utility.value(Vec(8, 0.0)) == doctest::Approx(s.utility.value(Vec(8, 0.0))));
}

TEST_CASE("minimal scenario uses defaults") {
  const Scenario s = parse_scenario(R"(
items: 2
matchings:
  - {mu: [0, 0], reward: 0}
  - {mu: [1, 1], reward: 3}
arrivals: {kind: independent-poisson, rates: [0.5, 0.5]}
)");
  CHECK(s.items.size() == 2);
  CHECK(s.gamma == Vec{1, 1});
  CHECK(s.holding_costs == Vec{0, 0});
  CHECK(s.completion_scan == CompletionScan::Restart);
  CHECK(validate_scenario(s).empty());
}

TEST_CASE("schema errors cite line numbers") {
  try {
    parse_scenario("items: 2\nmatchings:\n  - {mu: [0, 0], reward: 0}\narrivals: {kind: poisson}\n");
    FAIL("expected a schema error");
  } catch (const SchemaError& e) {
    CHECK(e.line == 4);
    CHECK(std::string(e.what()).find("line 4") == 0);
  }
  try {
    parse_scenario("items: 2\nmatchings:\n  - {mu: [0, 0], reward: 0}\narrivals: {kind: deterministic, items: [1, 1]}\n"
                   "colour: red\n");
    FAIL("expected a schema error");
  } catch (const SchemaError& e) {
    CHECK(e.line == 5);
  }
  try {
    parse_scenario("items: 2\nmatchings:\n  - {mu: [0, zero], reward: 0}\n");
    FAIL("expected a schema error");
  } catch (const SchemaError& e) {
    CHECK(e.line == 3);
  }
  CHECK_THROWS_AS(parse_scenario("items: [a, b\n"), SchemaError);
}

TEST_CASE("csv writer and self-check") {
  std::ostringstream out;
  CsvWriter w(out);
  w.header({"t", "a", "b"});
  w.field(std::int64_t{0}).field(0.1).field(std::string("x")).end_row();
  w.field(std::int64_t{5}).field(1e300).field(std::string("y")).end_row();
  std::istringstream in(out.str());
  CHECK_FALSE(check_csv(in).has_value());
  CHECK(out.str().find("0.1,") != std::string::npos);

  std::istringstream ragged("t,a\n0,1\n1\n");
  CHECK(check_csv(ragged).has_value());
  std::istringstream backwards("t,a\n2,1\n1,1\n");
  CHECK(check_csv(backwards).has_value());
}

TEST_CASE("format_double is shortest round trip") {
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(2.0) == "2");
  CHECK(std::stod(format_double(1.0 / 3.0)) == 1.0 / 3.0);
}
