#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "egpd/fluid.hpp"
#include "egpd/harness.hpp"
#include "egpd/matching.hpp"
#include "egpd/oracle.hpp"
#include "egpd/scenario_io.hpp"

namespace py = pybind11;
using namespace egpd;

namespace {

py::dict lp_dict(const MatchingLpSolution& lp) {
  py::dict d;
  d["value"] = lp.value;
  d["rates"] = lp.rates;
  d["item_duals"] = lp.item_duals;
  d["budget_dual"] = lp.budget_dual;
  d["pivots"] = lp.pivots;
  return d;
}

py::dict report_dict(const RunReport& r) {
  py::dict d;
  d["name"] = r.name;
  d["digest"] = r.digest;
  d["passed"] = r.passed();
  py::list checks;
  for (const auto& c : r.checks) {
    py::dict cd;
    cd["name"] = c.name;
    cd["passed"] = c.passed;
    cd["detail"] = c.detail;
    checks.append(cd);
  }
  d["checks"] = checks;
  d["json"] = r.to_json();
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Greedy primal-dual matching and network control";

  py::register_exception<SchemaError>(m, "SchemaError", PyExc_ValueError);
  py::register_exception<InfeasibleError>(m, "InfeasibleError", PyExc_RuntimeError);
  py::register_exception<DomainError>(m, "DomainError", PyExc_ArithmeticError);

  py::class_<Scenario>(m, "Scenario")
      .def_readwrite("name", &Scenario::name)
      .def_readonly("items", &Scenario::items)
      .def_readwrite("m", &Scenario::m)
      .def_readwrite("beta", &Scenario::beta)
      .def_readwrite("horizon", &Scenario::horizon)
      .def_readwrite("seed", &Scenario::seed)
      .def_property_readonly("num_matchings", &Scenario::num_matchings)
      .def_property_readonly("rewards", &Scenario::rewards)
      .def("validate",
           [](const Scenario& s) {
             std::vector<std::pair<std::string, std::string>> out;
             for (const auto& d : validate_scenario(s)) out.emplace_back(d.field, d.message);
             return out;
           })
      .def("dump", &dump_scenario)
      .def("__repr__", [](const Scenario& s) { return "<Scenario " + s.name + ">"; });

  m.def("parse_scenario", &parse_scenario, py::arg("text"));
  m.def("load_scenario", &load_scenario, py::arg("path"));
  m.def("experiment_a", &experiment_a);
  m.def("experiment_c", &experiment_c);
  m.def("bipartite_scenario", &bipartite_scenario);

  m.def(
      "matching_lp",
      [](const Scenario& s, std::optional<Vec> alpha) { return lp_dict(solve_matching_lp(s, std::move(alpha))); },
      py::arg("scenario"), py::arg("alpha") = py::none(), "Optimal per-slot matching rates and item prices.");

  m.def(
      "simulate",
      [](const Scenario& s, std::int64_t stride) {
        SchemeConfig cfg;
        cfg.stride = stride;
        SchemeRun run;
        {
          py::gil_scoped_release release;
          run = run_scheme(s, cfg);
        }
        py::dict d = report_dict(simulate_report(s, run));
        d["avg_reward"] = run.average_reward();
        d["avg_holding_cost"] = run.average_holding_cost();
        d["completed_rates"] = run.completed_rates();
        d["virtual_rates"] = run.virtual_rates();
        d["invariant_violations"] = run.invariants.violations();
        d["Q"] = run.final_state.v.Q;
        d["Qhat"] = run.final_state.p.Qhat;
        d["pending"] = run.final_state.p.qhat0();
        return d;
      },
      py::arg("scenario"), py::arg("stride") = 100);

  m.def(
      "beta_sweep",
      [](const Scenario& s, std::vector<double> betas, int replicates, unsigned threads) {
        std::vector<SweepRow> rows;
        {
          py::gil_scoped_release release;
          rows = beta_sweep(s, std::move(betas), replicates, threads);
        }
        py::list out;
        for (const auto& r : rows) {
          py::dict d;
          d["beta"] = r.beta;
          d["avg_reward"] = r.avg_reward;
          d["avg_holding_cost"] = r.avg_holding_cost;
          d["avg_profit"] = r.avg_profit;
          d["mean_abs_q"] = r.mean_abs_q;
          d["invariant_violations"] = r.invariant_violations;
          out.append(d);
        }
        return out;
      },
      py::arg("scenario"), py::arg("betas"), py::arg("replicates") = 1, py::arg("threads") = 0);

  m.def("preset_names", &preset_names);
  m.def(
      "run_preset",
      [](const std::string& name) {
        RunReport r;
        {
          py::gil_scoped_release release;
          r = run_preset(name);
        }
        return report_dict(r);
      },
      py::arg("name"));

  m.def(
      "fluid",
      [](const Scenario& s, double t_end, double h) {
        FluidOptions opt;
        opt.t_end = t_end;
        opt.h = h;
        const ScenarioFluid f = fluid_for_scenario(s, opt);
        const auto& tr = f.trajectory;
        py::dict d;
        d["optimal_value"] = f.saddle.value;
        d["x"] = tr.final_state.x;
        d["q"] = tr.final_state.q;
        d["rho0"] = tr.rho0;
        d["entered_region_at"] = tr.entered_region_at;
        d["worst_fstar_step"] = tr.worst_fstar_step;
        d["negative_constrained"] = tr.negative_constrained;
        if (f.convergence) {
          d["terminal_rho_star"] = f.convergence->terminal_rho_star;
          d["q_bounded"] = f.convergence->q_bounded;
          d["converged"] = f.convergence->converged;
        }
        py::list t, rho;
        for (const auto& smp : tr.samples) {
          t.append(smp.t);
          rho.append(smp.rho_V);
        }
        d["t"] = t;
        d["rho_V"] = rho;
        return d;
      },
      py::arg("scenario"), py::arg("t_end") = 50.0, py::arg("h") = 1e-3);

  m.def(
      "check_ncond",
      [](const Vec& top, const Vec& bottom, const std::vector<std::pair<std::size_t, std::size_t>>& edges) {
        const auto r = check_ncond(top, bottom, edges);
        py::dict d;
        d["stabilizable"] = r.stabilizable;
        d["violating_subset"] = r.violating_subset;
        return d;
      },
      py::arg("top_rates"), py::arg("bottom_rates"), py::arg("edges"));

  m.def(
      "drift_condition",
      [](const Scenario& s, double epsilon) {
        const auto mapped = map_to_network(s);
        const auto raw = check_drift_condition(mapped.net, epsilon);
        const auto red = reduce_drift_subspace(mapped.net);
        const auto reduced = check_drift_condition(red.reduced, epsilon);
        py::dict d;
        d["holds"] = raw.holds;
        d["margin"] = raw.margin;
        d["reduced_holds"] = reduced.holds;
        d["reduced_margin"] = reduced.margin;
        d["reduced_dimension"] = red.dimension();
        return d;
      },
      py::arg("scenario"), py::arg("epsilon") = 1e-6);
}
