#include "egpd/fluid.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "egpd/csv.hpp"
#include "egpd/egpd.hpp"
#include "egpd/matching.hpp"

namespace egpd {

namespace {

double half_norm2(const Vec& a, const Vec* shift = nullptr) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - (shift ? (*shift)[i] : 0.0);
    s += d * d;
  }
  return 0.5 * s;
}

double lyapunov_f(const UtilitySpec& u, const Vec& x, const Vec& q) { return u.value(x) - half_norm2(q); }

double lyapunov_fstar(const UtilitySpec& u, const Vec& x, const Vec& q, const Vec& qs) {
  return u.value(x) - dot(qs, x) - half_norm2(q, &qs);
}

}  // namespace

FluidTrajectory integrate(const RateRegion& region, const UtilitySpec& utility, Vec x0, Vec q0,
                          const FluidOptions& opt) {
  const std::size_t n = region.dimension();
  if (!(opt.h > 0.0)) throw std::invalid_argument("step size h must be positive");
  if (x0.size() != n || q0.size() != n) throw std::invalid_argument("initial state has wrong dimension");
  if (opt.record_stride < 1 || opt.rho_stride < 1) throw std::invalid_argument("strides must be positive");
  for (std::size_t i = 0; i < region.n_constrained; ++i) {
    if (q0[i] < 0.0) throw std::invalid_argument("initial constrained q is negative");
  }
  FluidState st{std::move(x0), std::move(q0), 0.0, Vec(n, 0.0)};
  if (!utility.in_domain(st.x)) throw FluidDomainError("x0 lies outside the utility domain", st);

  const RateRegionSolution* saddle = opt.saddle ? &*opt.saddle : nullptr;
  const bool face = saddle && opt.face_coefficients.size() == n;
  const double h_star = saddle ? saddle->value : 0.0;

  FluidTrajectory traj;
  traj.rho0 = distance_to_polytope(st.x, region);
  const auto steps = static_cast<std::int64_t>(std::llround(opt.t_end / opt.h));
  bool inside = traj.rho0 <= opt.in_region_threshold;
  if (inside) traj.entered_region_at = 0.0;

  double f_prev = NAN, f_curr = lyapunov_f(utility, st.x, st.q);
  double hx_curr = utility.value(st.x);
  for (std::int64_t k = 0;; ++k) {
    const double t = static_cast<double>(k) * opt.h;
    st.t = t;
    Vec g = utility.gradient(st.x);
    for (std::size_t i = 0; i < n; ++i) {
      if (!std::isfinite(g[i])) {
        throw FluidDomainError("non-finite utility gradient at coordinate " + std::to_string(i), st);
      }
    }
    Vec dir(n);
    for (std::size_t i = 0; i < n; ++i) dir[i] = g[i] - st.q[i];
    const auto ties = support_argmax(region, dir);
    if (opt.mode == SelectionMode::LowestIndex || ties.size() == 1) {
      st.v = region.vertices[ties.front()];
    } else {
      st.v.assign(n, 0.0);
      for (std::size_t kk : ties)
        for (std::size_t i = 0; i < n; ++i) st.v[i] += region.vertices[kk][i] / static_cast<double>(ties.size());
    }

    const bool record = k % opt.record_stride == 0 || k == steps;
    const bool rho_now = k % opt.rho_stride == 0 || k == steps;
    double rho = NAN;
    if (rho_now) {
      rho = k == 0 ? traj.rho0 : distance_to_polytope(st.x, region);
      traj.max_contraction_excess = std::max(traj.max_contraction_excess, rho - traj.rho0 * std::exp(-t));
      if (!inside && rho <= opt.in_region_threshold) {
        inside = true;
        traj.entered_region_at = t;
      }
    }
    double b1 = NAN, b2 = NAN, b3 = NAN;
    if (saddle) {
      const Vec& vs = saddle->v_star;
      const Vec& qs = saddle->q_star;
      b1 = b2 = b3 = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        b1 += (g[i] - qs[i]) * (vs[i] - st.x[i]);
        b2 -= (st.q[i] - qs[i]) * vs[i];
        b3 += (g[i] - st.q[i]) * (st.v[i] - vs[i]);
      }
      if (inside) traj.worst_B = std::min({traj.worst_B, b1, b2, b3});
    }
    if (record) {
      LyapunovSample smp;
      smp.t = t;
      smp.x = st.x;
      smp.q = st.q;
      smp.vertex = static_cast<std::int64_t>(ties.front());
      smp.F = f_curr;
      if (saddle) {
        smp.Fstar = lyapunov_fstar(utility, st.x, st.q, saddle->q_star);
        smp.B1 = b1;
        smp.B2 = b2;
        smp.B3 = b3;
        if (face && rho_now) {
          smp.rho_Vstar = distance_to_optimal_face(st.x, region, opt.face_coefficients, *saddle, opt.rho_tol);
        }
      }
      smp.rho_V = rho;
      traj.samples.push_back(std::move(smp));
    }
    if (k == steps) break;

    const double fstar_before = saddle && inside ? lyapunov_fstar(utility, st.x, st.q, saddle->q_star) : 0.0;
    FluidState next = st;
    for (std::size_t i = 0; i < n; ++i) {
      next.x[i] += opt.h * (st.v[i] - st.x[i]);
      next.q[i] += opt.h * st.v[i];
      if (i < region.n_constrained && next.q[i] < 0.0) next.q[i] = 0.0;
    }
    next.t = t + opt.h;
    if (!utility.in_domain(next.x)) throw FluidDomainError("trajectory left the utility domain", st);
    st = std::move(next);
    for (std::size_t i = 0; i < region.n_constrained; ++i)
      if (st.q[i] < 0.0) ++traj.negative_constrained;

    const double f_next = lyapunov_f(utility, st.x, st.q);
    if (saddle && !std::isnan(f_prev)) {
      traj.worst_value_gap = std::min(traj.worst_value_gap, (f_next - f_prev) / (2.0 * opt.h) - (h_star - hx_curr));
    }
    if (saddle && inside) {
      const double delta = lyapunov_fstar(utility, st.x, st.q, saddle->q_star) - fstar_before;
      traj.worst_fstar_step = std::min(traj.worst_fstar_step, delta);
      ++traj.fstar_checked_steps;
    }
    f_prev = f_curr;
    f_curr = f_next;
    hx_curr = utility.value(st.x);
  }
  traj.steps = steps;
  traj.final_state = std::move(st);
  return traj;
}

ConvergenceReport check_convergence(const FluidTrajectory& traj, const RateRegion& region,
                                    std::span<const double> h, const RateRegionSolution& solution,
                                    double tol) {
  ConvergenceReport r;
  if (traj.samples.empty()) return r;
  const double t_end = traj.samples.back().t;
  for (const auto& s : traj.samples) {
    if (!std::isnan(s.rho_Vstar)) r.rho_star_series.emplace_back(s.t, s.rho_Vstar);
    const double qn = norm(s.q);
    r.sup_q = std::max(r.sup_q, qn);
    if (s.t <= 0.5 * t_end) r.sup_q_first_half = std::max(r.sup_q_first_half, qn);
    else r.sup_q_second_half = std::max(r.sup_q_second_half, qn);
  }
  const FluidState& fin = traj.final_state;
  r.terminal_rho_star = distance_to_optimal_face(fin.x, region, h, solution, 1e-9);

  for (std::size_t i = 0; i < region.n_constrained; ++i) r.dual_feasibility = std::min(r.dual_feasibility, fin.q[i]);
  r.slackness = std::fabs(dot(fin.q, solution.v_star));
  double best = -INFINITY;
  Vec dir(h.begin(), h.end());
  for (std::size_t i = 0; i < dir.size(); ++i) dir[i] -= fin.q[i];
  for (const auto& b : region.vertices) best = std::max(best, dot(dir, b));
  r.duality_gap = best - dot(h, solution.v_star);

  r.q_bounded = std::isfinite(r.sup_q) &&
                r.sup_q_second_half <= r.sup_q_first_half + 0.05 * (1.0 + r.sup_q_first_half);
  r.converged = r.terminal_rho_star < tol && r.q_bounded;
  return r;
}

std::vector<ScaledComparison> compare_scaled_simulation(const Scenario& s, const std::vector<double>& betas,
                                                        const ScaledOptions& opt) {
  for (double g : s.gamma) {
    if (g != 1.0) throw std::invalid_argument("scaled comparison assumes unit gamma weights");
  }
  if (opt.grid_points < 1 || opt.replicates < 1) throw std::invalid_argument("grid and replicates must be positive");
  const MappedNetwork mapped = map_to_network(s);
  const RateRegion region = RateRegion::from_network(mapped.net);
  const SchemeState zero = SchemeState::initial(s);
  const NetState start = mapped.embed(zero.v);

  // Fluid path sampled on the comparison grid.
  const double dt = opt.t_end / opt.grid_points;
  FluidOptions fo;
  fo.h = opt.fluid_h;
  fo.t_end = opt.t_end;
  fo.record_stride = std::max(1, static_cast<int>(std::lround(dt / opt.fluid_h)));
  fo.rho_stride = std::numeric_limits<int>::max();
  std::vector<LyapunovSample> fluid;
  if (opt.t_end > 0.0) {
    fluid = integrate(region, mapped.utility, start.x, start.q, fo).samples;
  } else {
    LyapunovSample smp;
    smp.x = start.x;
    smp.q = start.q;
    fluid.push_back(std::move(smp));
  }
  const std::size_t grid = fluid.size();

  std::vector<ScaledComparison> out;
  for (double beta : betas) {
    if (!(beta > 0.0)) throw std::invalid_argument("beta must be positive");
    ScaledComparison row{beta, 0.0, 0.0};
    for (int r = 0; r < opt.replicates; ++r) {
      EgpdConfig cfg;
      cfg.beta = beta;
      cfg.gamma = mapped.gamma;
      cfg.horizon = static_cast<std::int64_t>(std::ceil(opt.t_end / beta)) + 1;
      cfg.seed = Rng::derive(opt.seed, static_cast<std::uint64_t>(r));
      cfg.x0 = start.x;
      cfg.q0 = start.q;
      cfg.stride = 1;
      const EgpdRun run = run_egpd(mapped.net, mapped.utility, cfg);
      double sup = 0.0, mean = 0.0;
      for (std::size_t g = 0; g < grid; ++g) {
        const double t = fluid[g].t;
        const auto idx = std::min<std::size_t>(static_cast<std::size_t>(std::llround(t / beta)), run.trace.size() - 1);
        const TraceRow& row_s = run.trace[idx];
        double d2 = 0.0;
        for (std::size_t i = 0; i < row_s.x.size(); ++i) {
          const double dx = row_s.x[i] - fluid[g].x[i];
          const double dq = beta * row_s.q[i] - fluid[g].q[i];
          d2 += dx * dx + dq * dq;
        }
        const double d = std::sqrt(d2);
        sup = std::max(sup, d);
        mean += d / static_cast<double>(grid);
      }
      row.sup_deviation += sup / opt.replicates;
      row.mean_deviation += mean / opt.replicates;
    }
    out.push_back(row);
  }
  return out;
}

ScenarioFluid fluid_for_scenario(const Scenario& s, FluidOptions opt, double converge_tol) {
  const MappedNetwork mapped = map_to_network(s);
  const NetState start = mapped.embed(SchemeState::initial(s).v);
  ScenarioFluid out{RateRegion::from_network(mapped.net), {}, {}, {}, std::nullopt};
  if (mapped.utility.is_linear()) {
    out.face_coefficients = mapped.utility.linear_coefficients(out.region.dimension());
    out.saddle = solve_linear(out.region, out.face_coefficients, mapped.utility.constant());
  } else {
    out.saddle = solve_concave(out.region, mapped.utility);
  }
  opt.saddle = out.saddle;
  opt.face_coefficients = out.face_coefficients;
  out.trajectory = integrate(out.region, mapped.utility, start.x, start.q, opt);
  if (!out.face_coefficients.empty()) {
    out.convergence = check_convergence(out.trajectory, out.region, out.face_coefficients, out.saddle, converge_tol);
  }
  return out;
}

void write_trajectory_csv(std::ostream& out, const FluidTrajectory& traj) {
  CsvWriter csv(out);
  const std::size_t n = traj.final_state.x.size();
  std::vector<std::string> header{"t"};
  for (std::size_t i = 1; i <= n; ++i) header.push_back("x_" + std::to_string(i));
  for (std::size_t i = 1; i <= n; ++i) header.push_back("q_" + std::to_string(i));
  header.insert(header.end(), {"control_vertex", "F", "Fstar", "rho_V", "rho_Vstar"});
  csv.header(header);
  for (const auto& s : traj.samples) {
    csv.field(s.t);
    for (double v : s.x) csv.field(v);
    for (double v : s.q) csv.field(v);
    csv.field(s.vertex).field(s.F).field(s.Fstar).field(s.rho_V).field(s.rho_Vstar);
    csv.end_row();
  }
}

}  // namespace egpd
