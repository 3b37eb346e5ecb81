// egpd command-line front end. Exit codes: 0 ok, 1 usage, 2 schema, 3 check failed.
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "egpd/csv.hpp"
#include "egpd/fluid.hpp"
#include "egpd/harness.hpp"
#include "egpd/matching.hpp"
#include "egpd/oracle.hpp"
#include "egpd/scenario_io.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace egpd;

namespace {

constexpr int kOk = 0, kUsage = 1, kSchema = 2, kCheckFailed = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string scenario;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> horizon;
  std::optional<double> beta;
};

Scenario load(const Common& c) {
  if (!fs::is_regular_file(c.scenario)) throw UsageError("no such scenario file: " + c.scenario);
  Scenario s = load_scenario(c.scenario);
  if (c.seed) s.seed = *c.seed;
  if (c.horizon) s.horizon = *c.horizon;
  if (c.beta) s.beta = *c.beta;
  if (const auto diags = validate_scenario(s); !diags.empty()) {
    std::string msg = "invalid scenario";
    for (const auto& d : diags) msg += "\n  " + d.field + ": " + d.message;
    throw SchemaError(msg, 0);
  }
  return s;
}

fs::path out_dir(const Common& c) {
  fs::path dir = c.out.empty() ? default_output_dir() : fs::path(c.out);
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream f(p);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  f << text;
}

// Verifies a CSV just written to disk.
void self_check_csv(const fs::path& p) {
  std::ifstream in(p);
  if (auto err = check_csv(in)) throw std::runtime_error(p.string() + ": " + *err);
}

std::string vec_text(const Vec& v) {
  std::string s = "(";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + format_double(v[i]);
  return s + ")";
}

void print_checks(const RunReport& r) {
  for (const auto& c : r.checks) {
    std::cout << (c.passed ? "  [pass] " : "  [FAIL] ") << c.name;
    if (!c.detail.empty()) std::cout << ": " << c.detail;
    std::cout << "\n";
  }
}

int cmd_simulate(const Common& c, std::int64_t stride) {
  const Scenario s = load(c);
  SchemeConfig cfg;
  cfg.stride = stride;
  const auto start = std::chrono::steady_clock::now();
  const SchemeRun run = run_scheme(s, cfg);
  RunReport r = simulate_report(s, run);
  r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  const fs::path dir = out_dir(c);
  const fs::path csv = dir / (s.name + "_metrics.csv");
  {
    std::ofstream f(csv);
    write_metrics_csv(f, run, s);
  }
  self_check_csv(csv);
  write_file(dir / (s.name + "_report.json"), r.to_json() + "\n");

  std::cout << s.name << ": " << run.final_state.metrics.slots << " slots, average reward "
            << format_double(r.avg_reward) << ", internal average " << format_double(r.internal_average)
            << ", holding cost " << format_double(r.avg_holding_cost) << "\n";
  if (r.lp_value) std::cout << "  LP reference " << format_double(*r.lp_value) << "\n";
  std::cout << "  completed rates " << vec_text(r.completed_rates) << "\n";
  print_checks(r);
  std::cout << "wrote " << csv.string() << "\n";
  return r.passed() ? kOk : kCheckFailed;
}

int cmd_lp(const Common& c) {
  const Scenario s = load(c);
  const MatchingLpSolution lp = solve_matching_lp(s);
  const Vec alpha = s.arrivals.mean();
  Vec residuals(s.num_items(), 0.0);
  for (std::size_t i = 0; i < s.num_items(); ++i) {
    double used = 0.0;
    for (std::size_t j = 0; j < s.num_matchings(); ++j) used += lp.rates[j] * s.matchings[j].mu[i];
    residuals[i] = used - alpha[i];
  }
  double budget = -s.m;
  for (double x : lp.rates) budget += x;

  std::cout << "optimal average reward " << format_double(lp.value) << "\n";
  std::cout << std::left << std::setw(14) << "matching" << std::setw(10) << "reward" << "rate\n";
  for (std::size_t j = 0; j < s.num_matchings(); ++j) {
    std::cout << std::setw(14) << s.matchings[j].label << std::setw(10) << format_double(s.matchings[j].reward)
              << format_double(lp.rates[j]) << "\n";
  }
  std::cout << "item prices " << vec_text(lp.item_duals) << ", slot price " << format_double(lp.budget_dual) << "\n";

  json j;
  j["scenario"] = s.name;
  j["value"] = lp.value;
  j["rates"] = lp.rates;
  j["duals"] = {{"items", lp.item_duals}, {"budget", lp.budget_dual}};
  j["residuals"] = {{"items", residuals}, {"budget", budget}};
  j["pivots"] = lp.pivots;
  const fs::path p = out_dir(c) / (s.name + "_lp.json");
  write_file(p, j.dump(2) + "\n");
  std::cout << "wrote " << p.string() << "\n";
  return kOk;
}

int cmd_fluid(const Common& c, double t_end, double h, bool averaged) {
  const Scenario s = load(c);
  FluidOptions opt;
  opt.t_end = t_end;
  opt.h = h;
  opt.mode = averaged ? SelectionMode::Averaged : SelectionMode::LowestIndex;
  const auto start = std::chrono::steady_clock::now();
  const ScenarioFluid f = fluid_for_scenario(s, opt);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const FluidTrajectory& tr = f.trajectory;

  const fs::path dir = out_dir(c);
  const fs::path csv = dir / (s.name + "_fluid.csv");
  {
    std::ofstream out(csv);
    write_trajectory_csv(out, tr);
  }
  self_check_csv(csv);

  json j;
  j["scenario"] = s.name;
  j["t_end"] = t_end;
  j["h"] = h;
  j["mode"] = averaged ? "averaged" : "lowest-index";
  j["wall_seconds"] = secs;
  j["optimal_value"] = f.saddle.value;
  j["terminal_utility"] = map_to_network(s).utility.value(tr.final_state.x);
  // One fluid time unit is one decision round; m rounds make a slot.
  j["terminal_utility_per_slot"] = s.m * j["terminal_utility"].get<double>();
  j["optimal_value_per_slot"] = s.m * f.saddle.value;
  j["rho0"] = tr.rho0;
  j["entered_region_at"] = std::isnan(tr.entered_region_at) ? json(nullptr) : json(tr.entered_region_at);
  j["worst_fstar_step"] = tr.fstar_checked_steps ? json(tr.worst_fstar_step) : json(nullptr);
  j["worst_B"] = std::isfinite(tr.worst_B) ? json(tr.worst_B) : json(nullptr);
  j["max_contraction_excess"] = tr.max_contraction_excess;
  bool ok = true;
  if (f.convergence) {
    const ConvergenceReport& r = *f.convergence;
    j["terminal_rho_star"] = r.terminal_rho_star;
    j["sup_q"] = r.sup_q;
    j["q_bounded"] = r.q_bounded;
    j["dual_feasibility"] = r.dual_feasibility;
    j["slackness"] = r.slackness;
    j["duality_gap"] = r.duality_gap;
    j["converged"] = r.converged;
    ok = r.converged;
    std::cout << "terminal distance to optimal face " << format_double(r.terminal_rho_star) << ", sup |q| "
              << format_double(r.sup_q) << (r.q_bounded ? " (bounded)" : " (growing)") << "\n";
  }
  std::cout << "utility per slot at T " << format_double(j["terminal_utility_per_slot"].get<double>())
            << " vs optimum " << format_double(s.m * f.saddle.value) << "\n";
  const fs::path p = dir / (s.name + "_fluid.json");
  write_file(p, j.dump(2) + "\n");
  std::cout << "wrote " << csv.string() << "\n";
  return ok ? kOk : kCheckFailed;
}

int cmd_check(const Common& c, double epsilon) {
  const Scenario s = load(c);
  const MappedNetwork mapped = map_to_network(s);
  json j;
  j["scenario"] = s.name;
  bool ok = true;

  const DriftConditionReport raw = check_drift_condition(mapped.net, epsilon);
  json a1 = {{"holds", raw.holds}, {"margin", raw.margin}};
  std::cout << "drift condition: " << (raw.holds ? "holds" : "fails") << " (margin " << format_double(raw.margin)
            << ")\n";
  if (!raw.holds) {
    const SubspaceReduction red = reduce_drift_subspace(mapped.net);
    if (!red.full_rank) {
      const DriftConditionReport r2 = check_drift_condition(red.reduced, epsilon);
      a1["reduced_dimension"] = red.dimension();
      a1["reduced_holds"] = r2.holds;
      a1["reduced_margin"] = r2.margin;
      std::cout << "  after reduction to " << red.dimension() << " free coordinates: "
                << (r2.holds ? "holds" : "fails") << " (margin " << format_double(r2.margin) << ")\n";
      ok = r2.holds;
    } else {
      ok = false;
    }
  }
  j["drift_condition"] = a1;

  if (const auto sides = infer_bipartition(s)) {
    const NcondReport nc = check_ncond(sides->top_rates, sides->bottom_rates, sides->edges);
    json n = {{"stabilizable", nc.stabilizable}};
    if (nc.violating_subset) n["violating_subset"] = *nc.violating_subset;
    j["ncond"] = n;
    std::cout << "bipartite stabilizability: " << (nc.stabilizable ? "holds" : "fails") << "\n";
    ok = ok && nc.stabilizable;
  } else {
    j["ncond"] = nullptr;
    std::cout << "bipartite stabilizability: not a bipartite pair-matching system\n";
  }
  j["passed"] = ok;
  const fs::path p = out_dir(c) / (s.name + "_check.json");
  write_file(p, j.dump(2) + "\n");
  return ok ? kOk : kCheckFailed;
}

std::vector<double> parse_values(const std::vector<std::string>& raw) {
  std::vector<double> out;
  for (const auto& item : raw) {
    std::stringstream ss(item);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      if (tok.empty()) continue;
      std::size_t used = 0;
      double v;
      try {
        v = std::stod(tok, &used);
      } catch (const std::exception&) {
        throw UsageError("not a number: " + tok);
      }
      if (used != tok.size()) throw UsageError("not a number: " + tok);
      out.push_back(v);
    }
  }
  if (out.empty()) throw UsageError("--values needs at least one value");
  return out;
}

int cmd_sweep(const Common& c, const std::string& param, const std::vector<std::string>& raw, int replicates,
              unsigned threads) {
  if (param != "beta") throw UsageError("only --param beta is supported");
  const std::vector<double> values = parse_values(raw);
  for (double v : values)
    if (!(v > 0.0)) throw UsageError("beta values must be positive");
  const Scenario s = load(c);
  const auto rows = beta_sweep(s, values, replicates, threads);
  const fs::path p = out_dir(c) / (s.name + "_sweep.csv");
  {
    std::ofstream f(p);
    write_sweep_csv(f, rows);
  }
  self_check_csv(p);
  std::int64_t violations = 0;
  std::cout << std::left << std::setw(10) << "beta" << std::setw(14) << "reward" << std::setw(14) << "holding"
            << std::setw(14) << "profit" << "mean|Q|\n";
  for (const auto& r : rows) {
    violations += r.invariant_violations;
    std::cout << std::setw(10) << format_double(r.beta) << std::setw(14) << format_double(r.avg_reward)
              << std::setw(14) << format_double(r.avg_holding_cost) << std::setw(14) << format_double(r.avg_profit)
              << format_double(r.mean_abs_q) << "\n";
  }
  std::cout << "wrote " << p.string() << "\n";
  if (violations) std::cout << violations << " invariant violations\n";
  return violations ? kCheckFailed : kOk;
}

int cmd_preset(const std::string& name, const std::string& out, bool list) {
  if (list) {
    for (const auto& n : preset_names()) std::cout << n << "\n";
    return kOk;
  }
  const auto names = preset_names();
  if (std::find(names.begin(), names.end(), name) == names.end()) throw UsageError("unknown preset '" + name + "'");
  Common c;
  c.out = out;
  const fs::path dir = out_dir(c);
  const RunReport r = run_preset(name, dir);
  std::cout << name << " (" << format_double(r.wall_seconds) << " s)\n";
  if (r.avg_reward != 0.0) std::cout << "  average reward " << format_double(r.avg_reward) << "\n";
  if (r.lp_value) std::cout << "  LP reference " << format_double(*r.lp_value) << "\n";
  print_checks(r);
  std::cout << "wrote " << (dir / (name + "_report.json")).string() << "\n";
  return r.passed() ? kOk : kCheckFailed;
}

void add_common(CLI::App* sub, Common& c, bool overrides = true) {
  sub->add_option("scenario", c.scenario, "scenario YAML file")->required();
  sub->add_option("-o,--out", c.out, "output directory (default: $EGPD_OUT_DIR or ./out)");
  if (overrides) {
    sub->add_option("--seed", c.seed, "override the scenario seed");
    sub->add_option("--horizon", c.horizon, "override the number of slots");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"EGPD matching-system simulator and oracles"};
  app.require_subcommand(1);

  Common c;
  std::int64_t stride = 100;
  double t_end = 50.0, h = 1e-3, epsilon = 1e-6;
  bool averaged = false, list = false;
  std::string param, preset, preset_out;
  std::vector<std::string> values;
  int replicates = 1;
  unsigned threads = 0;

  auto* sim = app.add_subcommand("simulate", "run the virtual/physical matching scheme");
  add_common(sim, c);
  sim->add_option("--beta", c.beta, "override beta");
  sim->add_option("--stride", stride, "slots between metric rows")->check(CLI::NonNegativeNumber);

  auto* lp = app.add_subcommand("lp", "solve the matching LP");
  add_common(lp, c, false);

  auto* fl = app.add_subcommand("fluid", "integrate the fluid limit and report convergence");
  add_common(fl, c, false);
  fl->add_option("--t-end", t_end, "fluid horizon")->check(CLI::PositiveNumber);
  fl->add_option("--step", h, "Euler step")->check(CLI::PositiveNumber);
  fl->add_flag("--averaged", averaged, "average tied vertices instead of lowest index");

  auto* ck = app.add_subcommand("check", "drift condition and bipartite stabilizability");
  add_common(ck, c, false);
  ck->add_option("--epsilon", epsilon, "required drift margin")->check(CLI::PositiveNumber);

  auto* sw = app.add_subcommand("sweep", "parallel parameter sweep");
  add_common(sw, c);
  sw->add_option("--param", param, "swept parameter")->required();
  sw->add_option("--values", values, "values, space or comma separated")->required();
  sw->add_option("--replicates", replicates, "runs per value")->check(CLI::PositiveNumber);
  sw->add_option("--threads", threads, "worker threads (0: hardware)");

  auto* pr = app.add_subcommand("preset", "run a reference experiment");
  pr->add_option("name", preset, "preset name");
  pr->add_option("-o,--out", preset_out, "output directory");
  pr->add_flag("--list", list, "list preset names");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*sim) return cmd_simulate(c, stride);
    if (*lp) return cmd_lp(c);
    if (*fl) return cmd_fluid(c, t_end, h, averaged);
    if (*ck) return cmd_check(c, epsilon);
    if (*sw) return cmd_sweep(c, param, values, replicates, threads);
    if (*pr) {
      if (!list && preset.empty()) throw UsageError("preset needs a name (see --list)");
      return cmd_preset(preset, preset_out, list);
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const SchemaError& e) {
    std::cerr << "schema error: " << e.what() << "\n";
    return kSchema;
  } catch (const InfeasibleError& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return kCheckFailed;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kCheckFailed;
  }
  return kUsage;
}
