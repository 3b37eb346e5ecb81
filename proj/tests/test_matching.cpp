#include <cmath>
#include <sstream>

#include "doctest.h"
#include "egpd/csv.hpp"
#include "egpd/harness.hpp"
#include "egpd/matching.hpp"

using namespace egpd;

namespace {

Scenario random_system(Rng& rng, int trial) {
  Scenario s;
  s.name = "random" + std::to_string(trial);
  const std::size_t I = 2 + trial % 3;
  for (std::size_t i = 0; i < I; ++i) s.items.push_back("i" + std::to_string(i));
  s.matchings.push_back({"<>", Vec(I, 0.0), 0.0});
  const std::size_t J = 2 + trial % 5;
  for (std::size_t j = 0; j < J; ++j) {
    Vec mu(I, 0.0);
    double total = 0;
    while (total == 0) {
      for (double& v : mu) v = std::floor(3 * rng.uniform() * rng.uniform());
      for (double v : mu) total += v;
    }
    s.matchings.push_back({"m" + std::to_string(j), mu, std::round(20 * rng.uniform() - 5)});
  }
  for (std::size_t i = 0; i < I; ++i) s.matchings.push_back({"s" + std::to_string(i), Vec(I, 0.0), -1.0});
  for (std::size_t i = 0; i < I; ++i) s.matchings[J + 1 + i].mu[i] = 1.0;
  Vec rates(I);
  for (double& r : rates) r = 0.2 + 1.5 * rng.uniform();
  s.arrivals = ArrivalModel::independent_poisson(rates);
  s.m = 1 + trial % 4;
  s.beta = std::pow(10.0, -2.0 + 3.0 * rng.uniform());
  s.gamma.assign(I, 1.0);
  s.holding_costs.resize(I);
  for (double& c : s.holding_costs) c = rng.uniform();
  s.completion_policy = trial % 2 ? CompletionPolicy::CostPriority : CompletionPolicy::Fcfs;
  s.horizon = 2000;
  s.seed = 1000 + static_cast<std::uint64_t>(trial);
  return s;
}

}  // namespace

TEST_CASE("FCFS completes the oldest completable matching") {
  const Scenario s = experiment_a();
  PhysicalState p;
  p.Qhat = {1, 0, 1, 1};
  p.pending = {6, 5, 3, 4};  // <2,3>, <1,2>, <3>, <4>
  p.pending_load = {1, 2, 2, 1};
  const auto done = complete_one(p, s, CompletionPolicy::Fcfs);
  REQUIRE(done.has_value());
  CHECK(*done == 3);
  CHECK(p.Qhat == Vec{1, 0, 0, 1});
  CHECK(p.pending == std::deque<std::size_t>{6, 5, 4});
  CHECK(p.pending_load == Vec{1, 2, 1, 1});
}

TEST_CASE("cost priority completes the most expensive completable matching") {
  Scenario s = experiment_a();
  s.holding_costs = {0.1, 0.1, 0.2, 0.5};
  PhysicalState p;
  p.Qhat = {1, 1, 1, 1};
  p.pending = {3, 4, 5};
  p.pending_load = {1, 1, 1, 1};
  CHECK(complete_one(p, s, CompletionPolicy::CostPriority) == std::optional<std::size_t>(4));
  // Equal costs keep FIFO order.
  s.holding_costs = {0.2, 0.0, 0.2, 0.0};
  p.Qhat = {1, 1, 1, 1};
  p.pending = {3, 1};
  p.pending_load = {1, 0, 1, 0};
  CHECK(complete_one(p, s, CompletionPolicy::CostPriority) == std::optional<std::size_t>(3));
}

TEST_CASE("nothing completable leaves the state alone") {
  const Scenario s = experiment_a();
  PhysicalState p;
  p.Qhat = {0, 0, 0, 0};
  p.pending = {7};
  p.pending_load = {0, 1, 1, 1};
  CHECK_FALSE(complete_one(p, s, CompletionPolicy::Fcfs).has_value());
  CHECK(p.pending.size() == 1);
}

TEST_CASE("virtual and physical invariants hold on random systems") {
  Rng rng(31);
  for (int trial = 0; trial < 40; ++trial) {
    const Scenario s = random_system(rng, trial);
    CAPTURE(s.name);
    CAPTURE(s.beta);
    REQUIRE(validate_scenario(s).empty());
    SchemeConfig cfg;
    cfg.stride = 50;
    const auto run = run_scheme(s, cfg);
    CHECK(run.invariants.checks == s.horizon);
    CHECK(run.invariants.violations() == 0);

    // Independent recomputation on the recorded rows.
    const double mu_star = s.mu_star();
    for (const auto& row : run.rows) {
      double neg = 0, pos = 0, phys = 0;
      for (std::size_t i = 0; i < row.Q.size(); ++i) {
        REQUIRE(row.Qhat[i] >= 0.0);
        CHECK(row.Q[i] <= row.Qhat[i] + 1e-9);
        neg += std::max(-row.Q[i], 0.0);
        pos += std::max(row.Q[i], 0.0);
        phys += row.Qhat[i];
      }
      CHECK(static_cast<double>(row.qhat0) <= neg + 1e-9);
      CHECK(phys <= pos + mu_star * neg + 1e-9);
      std::int64_t gap = 0;
      for (std::size_t j = 0; j < row.virtual_counts.size(); ++j) {
        CHECK(row.completed_counts[j] <= row.virtual_counts[j]);
        gap += row.virtual_counts[j] - row.completed_counts[j];
      }
      CHECK(gap == static_cast<std::int64_t>(row.qhat0));
    }
    // Conservation on the final state.
    const auto& fin = run.final_state;
    Vec load(s.num_items(), 0.0);
    for (std::size_t j : fin.p.pending)
      for (std::size_t i = 0; i < load.size(); ++i) load[i] += s.matchings[j].mu[i];
    for (std::size_t i = 0; i < load.size(); ++i) CHECK(fin.p.Qhat[i] - fin.v.Q[i] == doctest::Approx(load[i]));
  }
}

TEST_CASE("one completion per round can leave completable matchings pending") {
  Scenario s = experiment_a();
  s.beta = 1.0;
  s.horizon = 5000;
  s.completion_scan = CompletionScan::Single;
  const auto single = run_scheme(s);
  CHECK(single.invariants.pending_bound > 0);
  s.completion_scan = CompletionScan::Restart;
  CHECK(run_scheme(s).invariants.violations() == 0);
}

TEST_CASE("matching scheme and mapped network choose identical sequences") {
  const Scenario base = experiment_a();
  double wmax = -INFINITY;
  for (const auto& m : base.matchings) wmax = std::max(wmax, m.reward);
  for (double c : {wmax + 1.0, wmax + 13.5}) {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      CAPTURE(c);
      CAPTURE(seed);
      Scenario s = base;
      s.seed = seed;
      s.horizon = 1000;
      SchemeConfig sc;
      sc.stride = 0;
      sc.record_decisions = true;
      const auto scheme = run_scheme(s, sc);

      const auto mapped = map_to_network(s, c);
      const NetState start = mapped.embed(SchemeState::initial(s).v);
      EgpdConfig ec;
      ec.beta = s.beta;
      ec.gamma = mapped.gamma;
      ec.horizon = s.horizon * s.m;
      ec.seed = s.seed;
      ec.x0 = start.x;
      ec.q0 = start.q;
      ec.stride = 0;
      ec.record_controls = true;
      const auto net = run_egpd(mapped.net, mapped.utility, ec);
      REQUIRE(scheme.decisions.size() == net.controls.size());
      CHECK(scheme.decisions == net.controls);
      // Free queues of the network are the virtual queues.
      for (std::size_t i = 0; i < s.num_items(); ++i)
        CHECK(net.final_state.q[mapped.J + i] == doctest::Approx(scheme.final_state.v.Q[i]));
    }
  }
}

TEST_CASE("rate change at slot 0 equals starting with the new rates") {
  Scenario changed = experiment_a();
  changed.horizon = 2000;
  changed.rate_changes.push_back({0, ArrivalModel::independent_poisson(experiment_c_new_rates())});
  Scenario direct = experiment_a();
  direct.horizon = 2000;
  direct.arrivals = ArrivalModel::independent_poisson(experiment_c_new_rates());
  SchemeConfig cfg;
  cfg.record_decisions = true;
  CHECK(run_scheme(changed, cfg).decisions == run_scheme(direct, cfg).decisions);
}

TEST_CASE("changing to identical rates gives a byte-identical trace") {
  Scenario a = experiment_a();
  a.horizon = 3000;
  Scenario b = a;
  b.rate_changes.push_back({1000, a.arrivals});
  std::ostringstream oa, ob;
  write_metrics_csv(oa, run_scheme(a), a);
  write_metrics_csv(ob, run_scheme(b), b);
  CHECK(oa.str() == ob.str());
}

TEST_CASE("only the empty matching: queues grow linearly and the run is unstable") {
  Scenario s;
  s.name = "idle";
  s.items = {"a", "b"};
  s.matchings = {{"<>", {0, 0}, 0}};
  s.arrivals = ArrivalModel::deterministic({1, 2});
  s.gamma = {1, 1};
  s.holding_costs = {0, 0};
  s.horizon = 400;
  const auto run = run_scheme(s);
  CHECK(run.final_state.v.Q == Vec{400, 800});
  CHECK(run.final_state.p.Qhat == Vec{400, 800});
  const auto report = simulate_report(s, run);
  bool stable_flag = true;
  for (const auto& c : report.checks)
    if (c.name == "stable") stable_flag = c.passed;
  CHECK_FALSE(stable_flag);
}

TEST_CASE("metrics csv columns and schema") {
  Scenario s = experiment_a();
  s.horizon = 500;
  const auto run = run_scheme(s);
  std::ostringstream out;
  write_metrics_csv(out, run, s);
  std::istringstream in(out.str());
  CHECK_FALSE(check_csv(in).has_value());
  const std::string header = out.str().substr(0, out.str().find('\n'));
  CHECK(header.rfind("t,virtual_rate_0,", 0) == 0);
  CHECK(header.find("avg_reward,avg_holding_cost,avg_profit,Q_1") != std::string::npos);
  CHECK(header.substr(header.size() - 6) == ",Qhat0");
}

TEST_CASE("X stays in the reward box") {
  Scenario s = experiment_a();
  s.beta = 0.3;
  s.horizon = 2000;
  SchemeState st = SchemeState::initial(s);
  Rng rng(s.seed, 0);
  for (int t = 0; t < 2000; ++t) {
    scheme_step(st, s, s.arrivals, rng);
    for (std::size_t j = 0; j < s.num_matchings(); ++j) {
      CHECK(st.v.X[j] >= std::min(0.0, s.matchings[j].reward) - 1e-12);
      CHECK(st.v.X[j] <= std::max(0.0, s.matchings[j].reward) + 1e-12);
    }
  }
}

TEST_CASE("virtual and completed rates agree up to the pending count") {
  const Scenario s = experiment_a();
  const auto run = run_scheme(s);
  const Vec v = run.virtual_rates(), c = run.completed_rates();
  const double T = static_cast<double>(s.horizon);
  for (std::size_t j = 0; j < v.size(); ++j)
    CHECK(v[j] - c[j] <= static_cast<double>(run.final_state.p.qhat0()) / T + 1e-12);
}
