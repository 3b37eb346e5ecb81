#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "egpd/model.hpp"

namespace egpd {

DriftConditionReport check_drift_condition(const NetworkModel& net, double epsilon) {
  const std::size_t nf = net.n_free();
  const std::size_t nc = net.n_constrained();
  if (nf > 20) {
    throw std::invalid_argument("exhaustive check infeasible: " + std::to_string(nf) +
                                " free nodes (limit 20)");
  }
  const std::size_t K = net.num_controls();
  DriftConditionReport report;
  report.margin = std::numeric_limits<double>::infinity();

  // Variables: phi_0..phi_{K-1} >= 0, delta free (last).
  for (std::uint64_t subset = 0; subset < (std::uint64_t{1} << nf); ++subset) {
    Vec objective(K + 1, 0.0);
    objective[K] = 1.0;
    LinearProgram lp(objective);
    lp.free_variables.assign(K + 1, false);
    lp.free_variables[K] = true;

    Vec simplex(K + 1, 1.0);
    simplex[K] = 0.0;
    lp.add_row(simplex, RowSense::Equal, 1.0);
    for (std::size_t n = 0; n < nc + nf; ++n) {
      Vec row(K + 1);
      for (std::size_t k = 0; k < K; ++k) row[k] = net.mean_increment(k)[n];
      const bool positive = n >= nc && ((subset >> (n - nc)) & 1U);
      row[K] = positive ? -1.0 : 1.0;
      lp.add_row(std::move(row), positive ? RowSense::GreaterEqual : RowSense::LessEqual, 0.0);
    }
    const LpSolution sol = solve_lp(lp);
    const double delta = sol.status == LpStatus::Optimal ? sol.x[K] : -std::numeric_limits<double>::infinity();
    report.subset_margins[subset] = delta;
    if (sol.status == LpStatus::Optimal) {
      report.witnesses[subset] = Vec(sol.x.begin(), sol.x.begin() + static_cast<std::ptrdiff_t>(K));
    }
    if (delta < report.margin) {
      report.margin = delta;
      report.worst_subset = subset;
    }
  }
  report.holds = report.margin >= epsilon;
  return report;
}

namespace {

// Appends the normalized residual of g to basis when it is independent.
void gram_schmidt_insert(Matrix& basis, Vec g, double tol) {
  const double n0 = norm(g);
  if (n0 <= 0.0) return;
  for (double& v : g) v /= n0;
  for (int pass = 0; pass < 2; ++pass) {
    for (const auto& b : basis) {
      const double p = dot(b, g);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= p * b[i];
    }
  }
  const double r = norm(g);
  if (r <= tol) return;
  for (double& v : g) v /= r;
  basis.push_back(std::move(g));
}

}  // namespace

SubspaceReduction reduce_drift_subspace(const NetworkModel& net, double tol) {
  if (!(tol > 0.0)) throw std::invalid_argument("rank tolerance must be positive");
  const std::size_t nc = net.n_constrained();
  const std::size_t nf = net.n_free();

  auto free_part = [&](const Vec& v) { return Vec(v.begin() + static_cast<std::ptrdiff_t>(nc), v.end()); };

  Matrix basis;
  for (std::size_t k = 0; k < net.num_controls(); ++k) {
    const Control& c = net.control(k);
    gram_schmidt_insert(basis, free_part(net.mean_increment(k)), tol);
    for (const auto& d : c.arrivals.variation_directions()) gram_schmidt_insert(basis, free_part(d), tol);
    if (net.rounds_per_slot() > 1) {
      // Arrival and non-arrival rounds realize different increments.
      gram_schmidt_insert(basis, free_part(c.arrivals.mean()), tol);
    }
  }

  if (basis.size() == nf) {
    Matrix identity(nf, Vec(nf, 0.0));
    for (std::size_t i = 0; i < nf; ++i) identity[i][i] = 1.0;
    return {std::move(identity), net, true};
  }

  const std::size_t r = basis.size();
  Matrix block(nc + r, Vec(nc + nf, 0.0));
  for (std::size_t i = 0; i < nc; ++i) block[i][i] = 1.0;
  for (std::size_t b = 0; b < r; ++b)
    for (std::size_t i = 0; i < nf; ++i) block[nc + b][nc + i] = basis[b][i];

  std::vector<Control> controls;
  for (const auto& c : net.controls()) {
    Vec mu(nc + r);
    for (std::size_t row = 0; row < nc + r; ++row) mu[row] = dot(block[row], c.mu);
    controls.push_back({c.label, std::move(mu), ArrivalModel::linear(c.arrivals, block)});
  }
  NetworkModel reduced(nc, r, std::move(controls), net.rounds_per_slot());
  return {std::move(basis), std::move(reduced), false};
}

NcondReport check_ncond(std::span<const double> top_rates, std::span<const double> bottom_rates,
                        const std::vector<std::pair<std::size_t, std::size_t>>& edges) {
  const std::size_t nt = top_rates.size();
  const std::size_t nb = bottom_rates.size();
  if (nt == 0 || nb == 0) throw std::invalid_argument("NCond needs items on both sides");
  if (nt > 30) throw std::invalid_argument("NCond enumeration limited to 30 top items");

  // Connectivity by union-find over top (0..nt) and bottom (nt..nt+nb) items.
  std::vector<std::size_t> parent(nt + nb);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  };
  std::vector<std::uint64_t> neighbours(nt, 0);
  for (const auto& [t, b] : edges) {
    if (t >= nt || b >= nb) throw std::invalid_argument("NCond edge index out of range");
    if (b >= 64) throw std::invalid_argument("NCond limited to 64 bottom items");
    neighbours[t] |= std::uint64_t{1} << b;
    parent[find(t)] = find(nt + b);
  }
  for (std::size_t i = 1; i < nt + nb; ++i) {
    if (find(i) != find(0)) throw std::invalid_argument("NCond requires connected matching graph");
  }

  NcondReport report;
  const double top_total = std::accumulate(top_rates.begin(), top_rates.end(), 0.0);
  const double bottom_total = std::accumulate(bottom_rates.begin(), bottom_rates.end(), 0.0);
  const double scale = std::max(1.0, std::max(top_total, bottom_total));
  if (std::fabs(top_total - bottom_total) > 1e-12 * scale) {
    // Unequal totals: one side accumulates no matter which subsets balance.
    std::vector<std::size_t> all(nt);
    std::iota(all.begin(), all.end(), 0);
    report.violating_subset = std::move(all);
    return report;
  }

  const std::uint64_t full = (std::uint64_t{1} << nt) - 1;
  for (std::uint64_t mask = 1; mask < full; ++mask) {
    double alpha_t = 0.0;
    std::uint64_t reach = 0;
    for (std::size_t i = 0; i < nt; ++i) {
      if ((mask >> i) & 1U) {
        alpha_t += top_rates[i];
        reach |= neighbours[i];
      }
    }
    double alpha_b = 0.0;
    for (std::size_t b = 0; b < nb; ++b)
      if ((reach >> b) & 1U) alpha_b += bottom_rates[b];
    if (!(alpha_t < alpha_b)) {
      std::vector<std::size_t> subset;
      for (std::size_t i = 0; i < nt; ++i)
        if ((mask >> i) & 1U) subset.push_back(i);
      report.violating_subset = std::move(subset);
      return report;
    }
  }
  report.stabilizable = true;
  return report;
}

}  // namespace egpd
