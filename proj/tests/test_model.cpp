#include <cmath>

#include "doctest.h"
#include "egpd/harness.hpp"
#include "egpd/model.hpp"

using namespace egpd;

namespace {

bool has_field(const std::vector<Diagnostic>& d, const std::string& field) {
  for (const auto& x : d)
    if (x.field == field) return true;
  return false;
}

}  // namespace

TEST_CASE("reference scenarios validate") {
  CHECK(validate_scenario(experiment_a()).empty());
  CHECK(validate_scenario(experiment_c()).empty());
  CHECK(validate_scenario(bipartite_scenario()).empty());
}

TEST_CASE("validation names each violated field") {
  Scenario s = experiment_a();
  s.beta = 0.0;
  CHECK(has_field(validate_scenario(s), "beta"));

  s = experiment_a();
  s.matchings[0].reward = 1.0;
  CHECK(has_field(validate_scenario(s), "matchings[0]"));

  s = experiment_a();
  s.gamma[2] = -1.0;
  CHECK(has_field(validate_scenario(s), "gamma"));

  s = experiment_a();
  s.m = 0;
  CHECK(has_field(validate_scenario(s), "m"));

  s = experiment_a();
  s.horizon = 0;
  CHECK(has_field(validate_scenario(s), "horizon"));

  s = experiment_a();
  s.matchings[3].mu = {1, 2};
  CHECK(has_field(validate_scenario(s), "matchings[3]"));

  s = experiment_a();
  s.arrivals = ArrivalModel::independent_poisson({1.2, 0.0, 2.0, 0.8});
  CHECK(has_field(validate_scenario(s), "arrivals"));

  s = experiment_a();
  s.holding_costs[0] = -0.1;
  CHECK(has_field(validate_scenario(s), "holding_costs"));

  s = experiment_c();
  s.rate_changes[0].slot = s.horizon + 1;
  CHECK(has_field(validate_scenario(s), "rate_changes[0]"));
}

TEST_CASE("batch table probabilities must sum to one") {
  auto ok = ArrivalModel::batch_table({{{1, 0}, 0.25}, {{0, 1}, 0.75}});
  CHECK(ok.problems().empty());
  auto bad = ArrivalModel::batch_table({{{1, 0}, 0.25}, {{0, 1}, 0.7}});
  REQUIRE_FALSE(bad.problems().empty());
  CHECK(bad.problems().front().find("sum to 1") != std::string::npos);
}

TEST_CASE("arrival sample means") {
  Rng rng(3);
  const std::vector<ArrivalModel> models = {
      ArrivalModel::independent_poisson({0.5, 2.0}),
      ArrivalModel::batch_table({{{1, 0}, 0.3}, {{0, 2}, 0.5}, {{1, 1}, 0.2}}),
      ArrivalModel::deterministic({3, 1}),
      ArrivalModel::linear(ArrivalModel::independent_poisson({1.0, 0.5}), {{1, 0}, {1, 1}, {0, 2}}),
  };
  for (const auto& a : models) {
    CAPTURE(a.kind_name());
    Vec sum(a.dimension(), 0.0);
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
      const Vec x = a.sample(rng);
      for (std::size_t k = 0; k < x.size(); ++k) sum[k] += x[k];
    }
    for (std::size_t k = 0; k < sum.size(); ++k) CHECK(sum[k] / n == doctest::Approx(a.mean()[k]).epsilon(0.02));
  }
}

TEST_CASE("batch-table samples stay in the support and within the bound") {
  const auto a = bipartite_scenario().arrivals;
  Rng rng(9);
  const double B = *a.bound();
  for (int i = 0; i < 5000; ++i) {
    const Vec x = a.sample(rng);
    bool in_table = false;
    for (const auto& b : a.batches()) in_table = in_table || b.items == x;
    REQUIRE(in_table);
    for (double v : x) CHECK(std::fabs(v) <= B);
  }
  CHECK_FALSE(ArrivalModel::independent_poisson({1.0}).bound().has_value());
}

TEST_CASE("utility gradients agree with finite differences") {
  const Vec lo{-2, -1, 0}, hi{3, 2, 4};
  CHECK_FALSE(audit_gradient(UtilitySpec::linear_sum(), lo, hi, 1).has_value());
  CHECK_FALSE(audit_gradient(UtilitySpec::weighted_linear({1, -2, 0.5}, 3), lo, hi, 2).has_value());
  CHECK_FALSE(audit_gradient(UtilitySpec::quadratic({1, 2, 3}, {0.5, 1, 2}, {0, 1, -1}), lo, hi, 3).has_value());
  CHECK_FALSE(audit_gradient(UtilitySpec::log_sum({1, 2, 1}, {3, 2, 1}), lo, hi, 4).has_value());

  // A wrong gradient is caught.
  auto wrong = UtilitySpec::concave(
      "wrong", [](std::span<const double> x) { return -x[0] * x[0]; },
      [](std::span<const double> x) { return Vec{-x[0]}; });
  const Vec l1{-1}, h1{1};
  CHECK(audit_gradient(wrong, l1, h1, 5).has_value());
}

TEST_CASE("log utility domain") {
  const auto u = UtilitySpec::log_sum({1, 1}, {1, 1});
  CHECK(u.in_domain(Vec{0, 0}));
  CHECK_FALSE(u.in_domain(Vec{-1, 0}));
  CHECK(u.value(Vec{0, 0}) == doctest::Approx(0));
}

TEST_CASE("embedded utility reads a window with a shift") {
  const auto base = UtilitySpec::weighted_linear({2, 3});
  const auto h = base.embedded(5, 1, 2, 10.0);
  CHECK(h.value(Vec{7, 1, 1, 7, 7}) == doctest::Approx(2 * 11 + 3 * 11));
  const Vec g = h.gradient(Vec(5, 0.0));
  CHECK(g == Vec{0, 2, 3, 0, 0});

  const auto q = UtilitySpec::quadratic({1, 1}, {1, 1}, {0, 0});
  const auto hq = q.embedded(3, 0, 2, -1.0);
  const Vec x{1, 2, 9};
  const Vec shifted{0, 1};
  CHECK(hq.value(x) == doctest::Approx(q.value(shifted)));
  const Vec gq = hq.gradient(x), gq0 = q.gradient(shifted);
  CHECK(gq[0] == doctest::Approx(gq0[0]));
  CHECK(gq[1] == doctest::Approx(gq0[1]));
  CHECK(gq[2] == doctest::Approx(0));
}

TEST_CASE("mu star") {
  CHECK(experiment_a().mu_star() == 3);
  CHECK(bipartite_scenario().mu_star() == 2);
}

TEST_CASE("network mean increments") {
  std::vector<Control> controls = {
      {"a", {1, 0}, ArrivalModel::deterministic({0, 4})},
      {"b", {0, 2}, ArrivalModel::deterministic({2, 0})},
  };
  NetworkModel net(1, 1, controls, 2);
  CHECK(net.mean_increment(0) == Vec{-1, 2});
  CHECK(net.mean_increment(1) == Vec{1, -2});
  CHECK(net.problems().empty());
  CHECK(net.arrival_bound() == 4);
  CHECK(net.max_removal() == 2);
}
