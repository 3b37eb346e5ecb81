#include <cmath>
#include <sstream>

#include "doctest.h"
#include "egpd/csv.hpp"
#include "egpd/egpd.hpp"
#include "egpd/harness.hpp"
#include "egpd/matching.hpp"

using namespace egpd;

namespace {

NetworkModel toy_network() {
  // One constrained queue fed by arrivals, one free node.
  std::vector<Control> controls = {
      {"idle", {0, 0}, ArrivalModel::independent_poisson({0.6, 0.5})},
      {"serve", {1, 1}, ArrivalModel::independent_poisson({0.6, 0.5})},
      {"push", {0, -1}, ArrivalModel::independent_poisson({0.6, 0.5})},
  };
  return NetworkModel(1, 1, controls);
}

}  // namespace

TEST_CASE("argmax picks the lowest tied index") {
  auto d = argmax_decision({1.0, 3.0, 2.0, 3.0});
  CHECK(d.control == 1);
  CHECK(d.ties == std::vector<std::size_t>{1, 3});
  d = argmax_decision({5.0, 5.0 * (1 + 1e-12), 4.0});
  CHECK(d.control == 0);
  CHECK(d.ties.size() == 2);
  d = argmax_decision({1.0, 1.0 + 1e-6});
  CHECK(d.control == 1);
}

TEST_CASE("horizon zero returns the initial state") {
  const auto net = toy_network();
  EgpdConfig cfg;
  cfg.horizon = 0;
  cfg.x0 = {0.5, -0.25};
  cfg.q0 = {2, 1};
  const auto run = run_egpd(net, UtilitySpec::linear_sum(), cfg);
  REQUIRE(run.trace.size() == 1);
  CHECK(run.trace[0].control == -1);
  CHECK(run.trace[0].x == cfg.x0);
  CHECK(run.trace[0].q == cfg.q0);
  CHECK(run.final_state.t == 0);
}

TEST_CASE("a single control is always chosen") {
  std::vector<Control> controls{{"only", {1, 0}, ArrivalModel::independent_poisson({1.0, 0.0})}};
  NetworkModel net(1, 1, controls);
  EgpdConfig cfg;
  cfg.horizon = 500;
  const auto run = run_egpd(net, UtilitySpec::linear_sum(), cfg);
  CHECK(run.activations[0] == 500);
}

TEST_CASE("queue and average dynamics properties") {
  const auto net = toy_network();
  const double B = 12.0;  // well above any Poisson(0.6) draw seen here
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    EgpdConfig cfg;
    cfg.beta = 0.05;
    cfg.horizon = 4000;
    cfg.seed = seed;
    const auto run = run_egpd(net, UtilitySpec::weighted_linear({1.0, 0.2}), cfg);
    for (const auto& row : run.trace) {
      REQUIRE(row.q[0] >= 0.0);
      // Convex combinations of realized increments lambda - mu.
      for (double x : row.x) {
        CHECK(x >= -net.max_removal());
        CHECK(x <= B + 1.0);
      }
    }
  }
}

TEST_CASE("constrained update clips before arrivals, free update does not") {
  const auto net = toy_network();
  NetState st{{0.5, 0.5}, {0, 0}, 0};
  const Vec lambda{2, 3};
  apply_increment(st, net, 1, lambda, 0.1);
  CHECK(st.q[0] == doctest::Approx(2.0));        // max(0.5 - 1, 0) + 2
  CHECK(st.q[1] == doctest::Approx(0.5 - 1 + 3));
  // Running average of the realized increment.
  CHECK(st.x[0] == doctest::Approx(0.1 * (2 - 1)));
  CHECK(st.x[1] == doctest::Approx(0.1 * (3 - 1)));
}

TEST_CASE("non-finite gradients are reported") {
  const auto net = toy_network();
  const auto u = UtilitySpec::log_sum({1, 1}, {0, 0});
  NetState st{{0, 0}, {0, 1}, 0};
  const Vec gamma{1, 1};
  CHECK_THROWS_AS(select_control(st, net, u, 0.1, gamma), DomainError);
}

TEST_CASE("trace csv passes the schema check") {
  const auto net = toy_network();
  EgpdConfig cfg;
  cfg.horizon = 50;
  cfg.stride = 7;
  const auto run = run_egpd(net, UtilitySpec::linear_sum(), cfg);
  std::ostringstream out;
  write_trace_csv(out, run, net.dimension());
  std::istringstream in(out.str());
  CHECK_FALSE(check_csv(in).has_value());
  CHECK(out.str().rfind("t,control,q_1,q_2,x_1,x_2,score_max", 0) == 0);
}

TEST_CASE("experiment A on the mapped network reproduces the reference rates") {
  const Scenario s = experiment_a();
  const auto mapped = map_to_network(s);
  EgpdConfig cfg;
  cfg.beta = s.beta;
  cfg.gamma = mapped.gamma;
  cfg.horizon = s.horizon * s.m;
  cfg.seed = s.seed;
  cfg.stride = 0;
  const NetState start = mapped.embed(SchemeState::initial(s).v);
  cfg.x0 = start.x;
  cfg.q0 = start.q;
  const auto run = run_egpd(mapped.net, mapped.utility, cfg);
  const Vec table = experiment_a_table_rates();
  for (std::size_t j = 1; j < s.num_matchings(); ++j) {
    CAPTURE(j);
    CHECK(std::fabs(run.activations[j] / double(s.horizon) - table[j - 1]) <= 0.05);
  }
}
