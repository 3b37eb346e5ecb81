#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "egpd/lp.hpp"
#include "egpd/model.hpp"

namespace egpd {

/// Convex hull of the mean increments of a network.
struct RateRegion {
  Matrix vertices;
  std::size_t n_constrained = 0;
  std::size_t n_free = 0;

  static RateRegion from_network(const NetworkModel& net);

  std::size_t dimension() const { return n_constrained + n_free; }
  std::size_t size() const { return vertices.size(); }
  Vec point(std::span<const double> phi) const;
};

class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RateRegionSolution {
  Vec phi;
  Vec v_star;
  double value = 0.0;       // H(v*)
  Vec q_star;               // >= 0 on constrained nodes
  double dual_value = 0.0;  // max_v (linearized H(v) - q*.v) over V
  double slackness = 0.0;   // q*.v*
  std::vector<std::size_t> active;
  bool converged = true;
  int iterations = 0;
  double gap = 0.0;
};

/// max h.v + constant over the feasible part of V.
RateRegionSolution solve_linear(const RateRegion& region, std::span<const double> h,
                                double constant = 0.0);
/// Convenience overload using the utility's linear coefficients.
RateRegionSolution solve_linear(const NetworkModel& net, const UtilitySpec& utility);

struct ConcaveOptions {
  double tol = 1e-10;
  int max_iters = 20000;
  std::optional<std::uint64_t> random_start;  // seed of a random initial vertex
};

/// Away-step Frank-Wolfe over the feasible part of V.
RateRegionSolution solve_concave(const RateRegion& region, const UtilitySpec& utility,
                                 const ConcaveOptions& options = {});

/// Euclidean distance from x to V (minimum-norm point, exact up to rounding).
double distance_to_polytope(std::span<const double> x, const RateRegion& region);

/// Distance from x to the optimal face {v feasible in V : h.v >= value(solution)}.
double distance_to_optimal_face(std::span<const double> x, const RateRegion& region,
                                std::span<const double> h, const RateRegionSolution& solution,
                                double tol = 1e-9);

/// All vertex indices maximizing direction.b(k) up to an absolute tie tolerance.
std::vector<std::size_t> support_argmax(const RateRegion& region, std::span<const double> direction,
                                        double tie_tolerance = 1e-12);

struct MatchingLpSolution {
  double value = 0.0;
  Vec rates;       // per-slot activation rate of each matching, empty included
  Vec item_duals;  // one price per item type
  double budget_dual = 0.0;
  int pivots = 0;
};

/// Per-slot matching LP: x >= 0, sum x = m, sum_j x_j mu(j) = alpha,
/// maximize sum_j a_j w_j x_j for a linear utility with coefficients a.
MatchingLpSolution solve_matching_lp(const Scenario& s, std::optional<Vec> alpha = std::nullopt);

}  // namespace egpd
