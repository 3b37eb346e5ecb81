#include "egpd/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

namespace egpd {

RateRegion RateRegion::from_network(const NetworkModel& net) {
  return {net.mean_increments(), net.n_constrained(), net.n_free()};
}

Vec RateRegion::point(std::span<const double> phi) const {
  if (phi.size() != vertices.size()) throw std::invalid_argument("mixture has wrong length");
  Vec v(dimension(), 0.0);
  for (std::size_t k = 0; k < vertices.size(); ++k) {
    if (phi[k] == 0.0) continue;
    for (std::size_t n = 0; n < v.size(); ++n) v[n] += phi[k] * vertices[k][n];
  }
  return v;
}

namespace {

// Feasible part of V as an LP over mixtures: simplex row first, then one row per node.
LinearProgram feasibility_lp(const RateRegion& region, Vec objective) {
  const std::size_t K = region.size();
  LinearProgram lp(std::move(objective));
  lp.add_row(Vec(K, 1.0), RowSense::Equal, 1.0);
  for (std::size_t n = 0; n < region.dimension(); ++n) {
    Vec row(K);
    for (std::size_t k = 0; k < K; ++k) row[k] = region.vertices[k][n];
    lp.add_row(std::move(row), n < region.n_constrained ? RowSense::LessEqual : RowSense::Equal, 0.0);
  }
  return lp;
}

Vec vertex_scores(const RateRegion& region, std::span<const double> g) {
  Vec scores(region.size());
  for (std::size_t k = 0; k < region.size(); ++k) scores[k] = dot(region.vertices[k], g);
  return scores;
}

LpSolution solve_or_throw(const LinearProgram& lp) {
  LpSolution sol = solve_lp(lp);
  if (sol.status == LpStatus::Infeasible) {
    throw InfeasibleError(
        "rate-region LP infeasible: no mixture of controls keeps constrained drifts nonpositive and "
        "free drifts at zero");
  }
  if (sol.status != LpStatus::Optimal) {
    throw std::runtime_error("rate-region LP failed: " + to_string(sol.status));
  }
  return sol;
}

std::vector<std::size_t> support_of(const Vec& phi) {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < phi.size(); ++k)
    if (phi[k] > 1e-12) out.push_back(k);
  return out;
}

struct FwProblem {
  std::function<Vec(const Vec&)> gradient;           // of the maximized objective
  std::function<bool(const Vec&)> in_domain;
  std::function<Vec(const Vec&)> lmo;                // phi maximizing g.B phi
  std::function<double(const Vec&, const Vec&)> exact_step;  // optional closed form
  std::function<bool(double, const Vec&)> stop;      // (gap, v)
};

struct FwResult {
  Vec phi;
  Vec v;
  double gap = std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool converged = false;
};

struct Atom {
  Vec phi;
  Vec v;
  double weight;
};

double line_search(const FwProblem& p, const Vec& v, const Vec& d, double gmax) {
  if (p.exact_step) return std::clamp(p.exact_step(v, d), 0.0, gmax);
  auto at = [&](double g) {
    Vec y(v);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += g * d[i];
    return y;
  };
  auto slope = [&](const Vec& y) { return dot(p.gradient(y), d); };
  {
    const Vec y = at(gmax);
    if (p.in_domain(y) && slope(y) >= 0.0) return gmax;
  }
  double lo = 0.0, hi = gmax;
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    const Vec y = at(mid);
    if (!p.in_domain(y) || slope(y) < 0.0) hi = mid;
    else lo = mid;
  }
  return lo;
}

// Away-step Frank-Wolfe on mixtures; atoms are vertices returned by the oracle.
FwResult frank_wolfe(const RateRegion& region, const FwProblem& p, Vec phi0, int max_iters) {
  std::vector<Atom> atoms{{phi0, region.point(phi0), 1.0}};
  FwResult r;
  int stalls = 0;
  for (r.iterations = 0; r.iterations < max_iters; ++r.iterations) {
    Vec v(region.dimension(), 0.0);
    for (const auto& a : atoms)
      for (std::size_t i = 0; i < v.size(); ++i) v[i] += a.weight * a.v[i];
    const Vec g = p.gradient(v);

    Vec s_phi = p.lmo(g);
    Vec s_v = region.point(s_phi);
    const double fw_gap = dot(g, s_v) - dot(g, v);
    r.v = v;
    r.gap = fw_gap;
    if (p.stop(fw_gap, v)) {
      r.converged = true;
      break;
    }

    std::size_t away = 0;
    double away_score = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < atoms.size(); ++a) {
      const double sc = dot(g, atoms[a].v);
      if (sc < away_score) {
        away_score = sc;
        away = a;
      }
    }
    const double away_gap = dot(g, v) - away_score;

    Vec d(v.size());
    double gamma;
    if (fw_gap >= away_gap || atoms[away].weight >= 1.0) {
      for (std::size_t i = 0; i < d.size(); ++i) d[i] = s_v[i] - v[i];
      gamma = line_search(p, v, d, 1.0);
      for (auto& a : atoms) a.weight *= (1.0 - gamma);
      auto same = std::find_if(atoms.begin(), atoms.end(), [&](const Atom& a) {
        for (std::size_t k = 0; k < s_phi.size(); ++k)
          if (std::fabs(a.phi[k] - s_phi[k]) > 1e-12) return false;
        return true;
      });
      if (same != atoms.end()) same->weight += gamma;
      else atoms.push_back({std::move(s_phi), std::move(s_v), gamma});
    } else {
      const double w = atoms[away].weight;
      for (std::size_t i = 0; i < d.size(); ++i) d[i] = v[i] - atoms[away].v[i];
      gamma = line_search(p, v, d, w / (1.0 - w));
      for (auto& a : atoms) a.weight *= (1.0 + gamma);
      atoms[away].weight -= gamma;
    }
    std::erase_if(atoms, [](const Atom& a) { return a.weight <= 1e-15; });

    stalls = gamma == 0.0 ? stalls + 1 : 0;
    if (stalls >= 3) break;
  }
  double total = 0.0;
  for (const auto& a : atoms) total += a.weight;
  r.phi.assign(region.size(), 0.0);
  for (const auto& a : atoms)
    for (std::size_t k = 0; k < r.phi.size(); ++k) r.phi[k] += a.weight / total * a.phi[k];
  r.v = region.point(r.phi);
  return r;
}

FwProblem distance_problem(std::span<const double> x, double tol) {
  const Vec target(x.begin(), x.end());
  FwProblem p;
  p.gradient = [target](const Vec& v) {
    Vec g(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) g[i] = target[i] - v[i];
    return g;
  };
  p.in_domain = [](const Vec&) { return true; };
  p.exact_step = [target](const Vec& v, const Vec& d) {
    const double dd = dot(d, d);
    if (dd == 0.0) return 0.0;
    double num = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) num += (target[i] - v[i]) * d[i];
    return num / dd;
  };
  // Stopping at this gap bounds the distance error by tol.
  p.stop = [target, tol](double gap, const Vec& v) {
    double dist2 = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) dist2 += (v[i] - target[i]) * (v[i] - target[i]);
    return gap <= std::max(0.5 * tol * tol, 0.5 * tol * std::sqrt(dist2));
  };
  return p;
}

double distance(std::span<const double> x, const Vec& v) {
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) s += (x[i] - v[i]) * (x[i] - v[i]);
  return std::sqrt(s);
}

}  // namespace

RateRegionSolution solve_linear(const RateRegion& region, std::span<const double> h,
                                double constant) {
  if (h.size() != region.dimension()) throw std::invalid_argument("objective has wrong dimension");
  if (region.size() == 0) throw std::invalid_argument("rate region has no vertices");
  const LpSolution sol = solve_or_throw(feasibility_lp(region, vertex_scores(region, h)));
  RateRegionSolution out;
  out.phi = sol.x;
  out.v_star = region.point(out.phi);
  out.value = dot(h, out.v_star) + constant;
  out.q_star.assign(sol.duals.begin() + 1, sol.duals.end());
  out.dual_value = sol.duals[0] + constant;
  out.slackness = dot(out.q_star, out.v_star);
  out.active = support_of(out.phi);
  out.iterations = sol.pivots;
  out.gap = out.dual_value - out.value;
  return out;
}

RateRegionSolution solve_linear(const NetworkModel& net, const UtilitySpec& utility) {
  const Vec h = utility.linear_coefficients(net.dimension());
  return solve_linear(RateRegion::from_network(net), h, utility.constant());
}

RateRegionSolution solve_concave(const RateRegion& region, const UtilitySpec& utility,
                                 const ConcaveOptions& options) {
  auto lmo = [&](const Vec& g) { return solve_or_throw(feasibility_lp(region, vertex_scores(region, g))).x; };

  Vec start_dir(region.dimension(), 0.0);
  if (options.random_start) {
    Rng rng(*options.random_start, 0xf1a7);
    for (double& v : start_dir) v = 2.0 * rng.uniform() - 1.0;
  }
  Vec phi0 = lmo(start_dir);
  if (!utility.in_domain(region.point(phi0))) {
    throw DomainError("initial rate-region vertex lies outside the utility domain");
  }

  FwProblem p;
  p.gradient = [&](const Vec& v) {
    Vec g = utility.gradient(v);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (!std::isfinite(g[i])) throw DomainError("non-finite utility gradient at coordinate " + std::to_string(i));
    }
    return g;
  };
  p.in_domain = [&](const Vec& v) { return utility.in_domain(v); };
  p.lmo = lmo;
  p.stop = [&](double gap, const Vec&) { return gap <= options.tol; };

  const FwResult fw = frank_wolfe(region, p, std::move(phi0), options.max_iters);

  const Vec g = utility.gradient(fw.v);
  const RateRegionSolution lin = solve_linear(region, g);
  RateRegionSolution out;
  out.phi = fw.phi;
  out.v_star = fw.v;
  out.value = utility.value(fw.v);
  out.q_star = lin.q_star;
  out.dual_value = out.value - dot(g, fw.v) + lin.value;
  out.slackness = dot(out.q_star, out.v_star);
  out.active = support_of(out.phi);
  out.converged = fw.converged;
  out.iterations = fw.iterations;
  out.gap = out.dual_value - out.value;
  return out;
}

namespace {

// Wolfe's minimum-norm-point method on the translated vertex set.
double min_norm_point(const std::vector<Vec>& pts) {
  const std::size_t K = pts.size();
  const auto n = static_cast<Eigen::Index>(pts.front().size());
  Eigen::MatrixXd P(n, static_cast<Eigen::Index>(K));
  double scale = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    for (Eigen::Index i = 0; i < n; ++i) P(i, static_cast<Eigen::Index>(k)) = pts[k][static_cast<std::size_t>(i)];
    scale = std::max(scale, P.col(static_cast<Eigen::Index>(k)).squaredNorm());
  }
  const double eps = 1e-12 * std::max(scale, 1e-300);

  std::vector<std::size_t> corral;
  Eigen::VectorXd lambda(1);
  {
    Eigen::Index best;
    P.colwise().squaredNorm().minCoeff(&best);
    corral.push_back(static_cast<std::size_t>(best));
    lambda(0) = 1.0;
  }
  auto point_of = [&](const std::vector<std::size_t>& s, const Eigen::VectorXd& w) {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    for (std::size_t a = 0; a < s.size(); ++a) x += w(static_cast<Eigen::Index>(a)) * P.col(static_cast<Eigen::Index>(s[a]));
    return x;
  };
  Eigen::VectorXd x = point_of(corral, lambda);

  for (int major = 0; major < 1000; ++major) {
    const Eigen::VectorXd scores = P.transpose() * x;
    Eigen::Index j;
    scores.minCoeff(&j);
    if (x.squaredNorm() - scores(j) <= eps) break;
    if (std::find(corral.begin(), corral.end(), static_cast<std::size_t>(j)) != corral.end()) break;
    corral.push_back(static_cast<std::size_t>(j));
    lambda.conservativeResize(static_cast<Eigen::Index>(corral.size()));
    lambda(lambda.size() - 1) = 0.0;

    for (int minor = 0; minor < 1000; ++minor) {
      // Affine minimizer of the corral: [S'S 1; 1' 0][a; mu] = [0; 1].
      const auto m = static_cast<Eigen::Index>(corral.size());
      Eigen::MatrixXd A(m + 1, m + 1);
      for (Eigen::Index a = 0; a < m; ++a) {
        for (Eigen::Index b = 0; b < m; ++b)
          A(a, b) = P.col(static_cast<Eigen::Index>(corral[static_cast<std::size_t>(a)]))
                        .dot(P.col(static_cast<Eigen::Index>(corral[static_cast<std::size_t>(b)])));
        A(a, m) = 1.0;
        A(m, a) = 1.0;
      }
      A(m, m) = 0.0;
      Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m + 1);
      rhs(m) = 1.0;
      const Eigen::VectorXd alpha = A.colPivHouseholderQr().solve(rhs).head(m);
      if ((alpha.array() > 1e-14).all()) {
        lambda = alpha;
        x = point_of(corral, lambda);
        break;
      }
      double theta = 1.0;
      for (Eigen::Index a = 0; a < m; ++a) {
        if (alpha(a) <= 1e-14) theta = std::min(theta, lambda(a) / (lambda(a) - alpha(a)));
      }
      lambda = lambda + theta * (alpha - lambda);
      std::vector<std::size_t> kept;
      Eigen::VectorXd kept_lambda(m);
      Eigen::Index c = 0;
      for (Eigen::Index a = 0; a < m; ++a) {
        if (lambda(a) > 1e-14) {
          kept.push_back(corral[static_cast<std::size_t>(a)]);
          kept_lambda(c++) = lambda(a);
        }
      }
      corral = std::move(kept);
      lambda = kept_lambda.head(c) / kept_lambda.head(c).sum();
      x = point_of(corral, lambda);
    }
  }
  return x.norm();
}

}  // namespace

double distance_to_polytope(std::span<const double> x, const RateRegion& region) {
  if (x.size() != region.dimension()) throw std::invalid_argument("point has wrong dimension");
  if (region.size() == 0) throw std::invalid_argument("rate region has no vertices");
  std::vector<Vec> shifted(region.vertices);
  for (auto& v : shifted)
    for (std::size_t i = 0; i < v.size(); ++i) v[i] -= x[i];
  return min_norm_point(shifted);
}

double distance_to_optimal_face(std::span<const double> x, const RateRegion& region,
                                std::span<const double> h, const RateRegionSolution& solution,
                                double tol) {
  if (x.size() != region.dimension()) throw std::invalid_argument("point has wrong dimension");
  const double level = dot(h, solution.v_star);
  LinearProgram base = feasibility_lp(region, Vec(region.size(), 0.0));
  base.add_row(vertex_scores(region, h), RowSense::GreaterEqual, level - 1e-9 * (1.0 + std::fabs(level)));

  FwProblem p = distance_problem(x, tol);
  p.lmo = [&](const Vec& g) {
    LinearProgram lp = base;
    lp.objective = vertex_scores(region, g);
    return solve_or_throw(lp).x;
  };
  const FwResult fw = frank_wolfe(region, p, solution.phi, 200000);
  return distance(x, fw.v);
}

std::vector<std::size_t> support_argmax(const RateRegion& region, std::span<const double> direction,
                                        double tie_tolerance) {
  const Vec scores = vertex_scores(region, direction);
  const double best = *std::max_element(scores.begin(), scores.end());
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < scores.size(); ++k)
    if (scores[k] >= best - tie_tolerance) out.push_back(k);
  return out;
}

MatchingLpSolution solve_matching_lp(const Scenario& s, std::optional<Vec> alpha) {
  const std::size_t J = s.num_matchings();
  const std::size_t I = s.num_items();
  const Vec rates = alpha ? *alpha : s.arrivals.mean();
  if (rates.size() != I) throw std::invalid_argument("arrival-rate vector has wrong dimension");
  const Vec a = s.utility.linear_coefficients(J);

  Vec objective(J);
  for (std::size_t j = 0; j < J; ++j) objective[j] = a[j] * s.matchings[j].reward;
  LinearProgram lp(objective);
  lp.add_row(Vec(J, 1.0), RowSense::Equal, static_cast<double>(s.m));
  for (std::size_t i = 0; i < I; ++i) {
    Vec row(J);
    for (std::size_t j = 0; j < J; ++j) row[j] = s.matchings[j].mu[i];
    lp.add_row(std::move(row), RowSense::Equal, rates[i]);
  }
  const LpSolution sol = solve_lp(lp);
  if (sol.status == LpStatus::Infeasible) {
    throw InfeasibleError("matching LP infeasible: the arrival rates cannot be matched with m = " +
                          std::to_string(s.m) + " matchings per slot");
  }
  if (sol.status != LpStatus::Optimal) {
    throw std::runtime_error("matching LP failed: " + to_string(sol.status));
  }
  MatchingLpSolution out;
  out.value = sol.value + s.utility.constant();
  out.rates = sol.x;
  out.budget_dual = sol.duals[0];
  out.item_duals.assign(sol.duals.begin() + 1, sol.duals.end());
  out.pivots = sol.pivots;
  return out;
}

}  // namespace egpd
