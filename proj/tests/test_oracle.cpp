#include <Eigen/Dense>
#include <cmath>

#include "doctest.h"
#include "egpd/harness.hpp"
#include "egpd/matching.hpp"
#include "egpd/oracle.hpp"

using namespace egpd;

namespace {

// Oracle: distance to the hull by projecting onto the affine hull of every
// vertex subset and keeping projections with nonnegative barycentric weights.
double brute_force_distance(const Vec& x, const Matrix& pts) {
  const std::size_t K = pts.size(), n = x.size();
  double best = INFINITY;
  for (std::uint64_t mask = 1; mask < (1ULL << K); ++mask) {
    std::vector<std::size_t> s;
    for (std::size_t k = 0; k < K; ++k)
      if (mask >> k & 1) s.push_back(k);
    const auto m = static_cast<Eigen::Index>(s.size());
    // min |sum w_a p_a - x| with sum w = 1: KKT system.
    Eigen::MatrixXd A(m + 1, m + 1);
    Eigen::VectorXd r(m + 1);
    for (Eigen::Index a = 0; a < m; ++a) {
      for (Eigen::Index b = 0; b < m; ++b) {
        double d = 0;
        for (std::size_t i = 0; i < n; ++i) d += pts[s[a]][i] * pts[s[b]][i];
        A(a, b) = d;
      }
      double px = 0;
      for (std::size_t i = 0; i < n; ++i) px += pts[s[a]][i] * x[i];
      r(a) = px;
      A(a, m) = 1;
      A(m, a) = 1;
    }
    A(m, m) = 0;
    r(m) = 1;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
    if (lu.rank() < m + 1) continue;
    const Eigen::VectorXd w = lu.solve(r);
    bool ok = true;
    for (Eigen::Index a = 0; a < m; ++a) ok = ok && w(a) >= -1e-12;
    if (!ok) continue;
    double d2 = 0;
    for (std::size_t i = 0; i < n; ++i) {
      double y = 0;
      for (Eigen::Index a = 0; a < m; ++a) y += w(a) * pts[s[a]][i];
      d2 += (y - x[i]) * (y - x[i]);
    }
    best = std::min(best, std::sqrt(d2));
  }
  return best;
}

// Hull membership by a feasibility LP over mixtures.
bool in_hull(const Vec& x, const Matrix& pts) {
  LinearProgram lp(Vec(pts.size(), 0.0));
  lp.add_row(Vec(pts.size(), 1.0), RowSense::Equal, 1.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    Vec row(pts.size());
    for (std::size_t k = 0; k < pts.size(); ++k) row[k] = pts[k][i];
    lp.add_row(row, RowSense::Equal, x[i]);
  }
  return solve_lp(lp).status == LpStatus::Optimal;
}

}  // namespace

TEST_CASE("experiment A matching LP is exact") {
  const auto lp = solve_matching_lp(experiment_a());
  CHECK(std::fabs(lp.value - 10.8) <= 1e-9);
  const Vec expected{0.3, 0, 0, 1.7, 0.5, 1.2, 0, 0.3};
  for (std::size_t j = 0; j < expected.size(); ++j) {
    CAPTURE(j);
    CHECK(std::fabs(lp.rates[j] - expected[j]) <= 1e-9);
  }
  // Dual objective equals the primal value.
  const Vec alpha = experiment_a().arrivals.mean();
  CHECK(dot(lp.item_duals, alpha) + 4 * lp.budget_dual == doctest::Approx(10.8).epsilon(1e-12));
}

TEST_CASE("matching LP after the rate change") {
  const auto lp = solve_matching_lp(experiment_c(), experiment_c_new_rates());
  const Vec expected{0, 1.2, 0, 1.2, 0.8, 0.6, 0, 0.2};
  for (std::size_t j = 0; j < expected.size(); ++j) CHECK(std::fabs(lp.rates[j] - expected[j]) <= 1e-9);
}

TEST_CASE("matching LP reports infeasible rates") {
  Scenario s = experiment_a();
  s.m = 1;
  CHECK_THROWS_AS(solve_matching_lp(s), InfeasibleError);
}

TEST_CASE("rate-region LP on the mapped network: slackness, feasibility, saddle bound") {
  const Scenario s = experiment_a();
  const auto mapped = map_to_network(s);
  const RateRegion region = RateRegion::from_network(mapped.net);
  const auto sol = solve_linear(mapped.net, mapped.utility);
  CHECK(s.m * sol.value == doctest::Approx(10.8).epsilon(1e-12));
  CHECK(std::fabs(sol.slackness) <= 1e-9);
  CHECK(sol.gap == doctest::Approx(0).epsilon(1e-9));
  for (std::size_t n = 0; n < region.dimension(); ++n) {
    if (n < region.n_constrained) {
      CHECK(sol.v_star[n] <= 1e-9);
      CHECK(sol.q_star[n] >= -1e-9);
    } else {
      CHECK(std::fabs(sol.v_star[n]) <= 1e-9);
    }
  }
  double phi_sum = 0;
  for (double p : sol.phi) {
    CHECK(p >= -1e-12);
    phi_sum += p;
  }
  CHECK(phi_sum == doctest::Approx(1.0));

  // H(v) - q*.v <= H(v*) on random points of V.
  Rng rng(13);
  for (int trial = 0; trial < 100; ++trial) {
    Vec phi(region.size());
    double t = 0;
    for (double& p : phi) t += (p = -std::log(1.0 - rng.uniform()));
    for (double& p : phi) p /= t;
    const Vec v = region.point(phi);
    CHECK(mapped.utility.value(v) - dot(sol.q_star, v) <= sol.value + 1e-9);
  }
}

TEST_CASE("infeasible rate region throws") {
  // Single control that always grows a constrained queue.
  std::vector<Control> controls{{"grow", {0.0}, ArrivalModel::deterministic({1.0})}};
  NetworkModel net(1, 0, controls);
  CHECK_THROWS_AS(solve_linear(net, UtilitySpec::linear_sum()), InfeasibleError);
}

TEST_CASE("distance to polytope matches subset enumeration") {
  Rng rng(99);
  for (int trial = 0; trial < 300; ++trial) {
    CAPTURE(trial);
    const std::size_t n = 2 + trial % 3, K = 2 + trial % 5;
    RateRegion region;
    region.n_free = n;
    for (std::size_t k = 0; k < K; ++k) {
      Vec p(n);
      for (double& v : p) v = 4 * rng.uniform() - 2;
      region.vertices.push_back(p);
    }
    Vec x(n);
    for (double& v : x) v = 6 * rng.uniform() - 3;
    const double d = distance_to_polytope(x, region);
    CHECK(d == doctest::Approx(brute_force_distance(x, region.vertices)).epsilon(1e-9).scale(1.0));
  }
}

TEST_CASE("distance is zero exactly on hull points") {
  Rng rng(5);
  RateRegion region;
  region.n_free = 3;
  for (int k = 0; k < 5; ++k) region.vertices.push_back({rng.uniform(), rng.uniform(), rng.uniform()});
  for (int trial = 0; trial < 200; ++trial) {
    Vec x{1.2 * rng.uniform() - 0.1, 1.2 * rng.uniform() - 0.1, 1.2 * rng.uniform() - 0.1};
    const double d = distance_to_polytope(x, region);
    if (in_hull(x, region.vertices)) CHECK(d <= 1e-9);
    else CHECK(d > 0.0);
  }
  // A mixture reconstructs to distance zero.
  const Vec mix = region.point(Vec{0.2, 0.2, 0.2, 0.2, 0.2});
  CHECK(distance_to_polytope(mix, region) <= 1e-12);
}

TEST_CASE("optimal face distance") {
  const auto mapped = map_to_network(experiment_a());
  const RateRegion region = RateRegion::from_network(mapped.net);
  const Vec h = mapped.utility.linear_coefficients(region.dimension());
  const auto sol = solve_linear(region, h);
  CHECK(distance_to_optimal_face(sol.v_star, region, h, sol) <= 1e-8);
  // Moving along a free coordinate leaves the face at that distance.
  Vec x = sol.v_star;
  x.back() += 0.25;
  CHECK(distance_to_optimal_face(x, region, h, sol) == doctest::Approx(0.25).epsilon(1e-6));
  // The face distance never undercuts the distance to V.
  x = Vec(region.dimension(), 0.0);
  CHECK(distance_to_optimal_face(x, region, h, sol) >= distance_to_polytope(x, region) - 1e-9);
}

TEST_CASE("concave solver matches a grid search") {
  // Three vertices in the plane; both coordinates constrained.
  RateRegion region;
  region.n_constrained = 2;
  region.vertices = {{-1.0, 0.5}, {0.5, -1.0}, {-0.5, -0.5}};
  const auto u = UtilitySpec::quadratic({1.0, 0.5}, {2.0, 1.0}, {0.0, 0.0});
  const auto sol = solve_concave(region, u);
  CHECK(sol.converged);

  double best = -INFINITY;
  const int N = 800;
  for (int a = 0; a <= N; ++a) {
    for (int b = 0; a + b <= N; ++b) {
      const Vec phi{a / double(N), b / double(N), (N - a - b) / double(N)};
      const Vec v = region.point(phi);
      if (v[0] > 1e-12 || v[1] > 1e-12) continue;
      best = std::max(best, u.value(v));
    }
  }
  CHECK(sol.value >= best - 1e-9);
  CHECK(sol.value == doctest::Approx(best).epsilon(1e-4));
  CHECK(sol.v_star[0] <= 1e-9);
  CHECK(sol.v_star[1] <= 1e-9);
}

TEST_CASE("concave solver agrees with the LP for a linear utility") {
  const auto mapped = map_to_network(experiment_a());
  const RateRegion region = RateRegion::from_network(mapped.net);
  // Quadratic with negligible curvature behaves like the linear objective.
  const Vec a = mapped.utility.linear_coefficients(region.dimension());
  const auto u = UtilitySpec::quadratic(a, Vec(a.size(), 1e-9), Vec(a.size(), 0.0));
  const auto sol = solve_concave(region, u);
  const auto lin = solve_linear(region, a);
  CHECK(sol.value == doctest::Approx(lin.value).epsilon(1e-6));
}

TEST_CASE("support argmax ties") {
  RateRegion region;
  region.n_free = 2;
  region.vertices = {{1, 0}, {0, 1}, {1, 0}, {-1, -1}};
  const Vec dir{1, 0};
  CHECK(support_argmax(region, dir) == std::vector<std::size_t>{0, 2});
  const Vec both{1, 1};
  CHECK(support_argmax(region, both) == std::vector<std::size_t>{0, 1, 2});
}
