#include "egpd/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <thread>

#include "egpd/csv.hpp"
#include "egpd/oracle.hpp"
#include "egpd/scenario_io.hpp"
#include "json.hpp"

namespace egpd {

namespace {

MatchingSpec matching(std::string label, Vec mu, double reward) { return {std::move(label), std::move(mu), reward}; }

}  // namespace

Scenario experiment_a() {
  Scenario s;
  s.name = "expA";
  s.items = {"1", "2", "3", "4"};
  s.matchings = {
      matching("<>", {0, 0, 0, 0}, 0),       matching("<1>", {1, 0, 0, 0}, -1),
      matching("<2>", {0, 1, 0, 0}, -1),     matching("<3>", {0, 0, 1, 0}, 1),
      matching("<4>", {0, 0, 0, 1}, 2),      matching("<1,2>", {1, 1, 0, 0}, 5),
      matching("<2,3>", {0, 1, 1, 0}, 4),    matching("<2,3,4>", {0, 1, 1, 1}, 7),
  };
  s.arrivals = ArrivalModel::independent_poisson({1.2, 1.5, 2.0, 0.8});
  s.m = 4;
  s.beta = 0.01;
  s.gamma = Vec(4, 1.0);
  s.holding_costs = Vec(4, 0.0);
  s.horizon = 30000;
  s.seed = 20240601;
  return s;
}

Vec experiment_a_table_rates() { return {0, 0, 1.69345, 0.4829, 1.1924, 0, 0.31075}; }

Vec experiment_c_new_rates() { return {1.8, 0.8, 1.4, 1.0}; }

Scenario experiment_c() {
  Scenario s = experiment_a();
  s.name = "expC";
  s.beta = 0.1;
  s.horizon = 10000;
  s.rate_changes.push_back({2000, ArrivalModel::independent_poisson(experiment_c_new_rates())});
  return s;
}

std::vector<double> experiment_b_betas() { return {0.01, 0.1, 1, 10, 100}; }

Scenario bipartite_scenario() {
  Scenario s;
  s.name = "bipartite";
  s.items = {"1", "2", "3", "4", "1'", "2'", "3'", "4'"};
  auto pair = [](std::size_t a, std::size_t b) {
    Vec v(8, 0.0);
    v[a] = 1.0;
    v[b] = 1.0;
    return v;
  };
  const std::size_t p1 = 4, p2 = 5, p3 = 6, p4 = 7;
  s.matchings = {
      matching("<>", Vec(8, 0.0), 0),
      matching("<1,3'>", pair(0, p3), 5),  matching("<1,4'>", pair(0, p4), 50),
      matching("<2,3'>", pair(1, p3), 5),  matching("<2,4'>", pair(1, p4), 50),
      matching("<3,1'>", pair(2, p1), 5),  matching("<3,2'>", pair(2, p2), 50),
      matching("<3,3'>", pair(2, p3), 5),  matching("<4,1'>", pair(3, p1), 50),
      matching("<4,2'>", pair(3, p2), 5),
  };
  s.arrivals = ArrivalModel::batch_table({
      {pair(0, p1), 0.166},
      {pair(0, p2), 0.083},
      {pair(1, p1), 0.087},
      {pair(1, p2), 0.083},
      {pair(2, p4), 0.2324},
      {pair(3, p3), 0.2656},
      {pair(3, p4), 0.083},
  });
  s.m = 2;
  s.beta = 0.1;
  s.gamma = Vec(8, 1.0);
  s.holding_costs = {0.1, 0.2, 0.3, 0.4, 0.4, 0.3, 0.2, 0.1};
  s.horizon = 20000;
  s.seed = 20240602;
  return s;
}

std::vector<double> bipartite_betas() { return {0.01, 0.03, 0.1, 0.3, 1, 3, 10, 30, 100}; }

BipartiteSides bipartite_sides(const Scenario& s) {
  auto sides = infer_bipartition(s);
  if (!sides) throw std::invalid_argument("scenario is not a bipartite pair-matching system");
  return *sides;
}

std::optional<BipartiteSides> infer_bipartition(const Scenario& s) {
  const std::size_t I = s.num_items();
  std::vector<std::vector<std::size_t>> adj(I);
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t j = 1; j < s.num_matchings(); ++j) {
    std::vector<std::size_t> used;
    for (std::size_t i = 0; i < I; ++i) {
      if (s.matchings[j].mu[i] == 1.0) used.push_back(i);
      else if (s.matchings[j].mu[i] != 0.0) return std::nullopt;
    }
    if (used.size() != 2) return std::nullopt;
    adj[used[0]].push_back(used[1]);
    adj[used[1]].push_back(used[0]);
    pairs.emplace_back(used[0], used[1]);
  }
  std::vector<int> colour(I, -1);
  for (std::size_t start = 0; start < I; ++start) {
    if (colour[start] >= 0) continue;
    colour[start] = 0;
    std::vector<std::size_t> stack{start};
    while (!stack.empty()) {
      const std::size_t a = stack.back();
      stack.pop_back();
      for (std::size_t b : adj[a]) {
        if (colour[b] < 0) {
          colour[b] = 1 - colour[a];
          stack.push_back(b);
        } else if (colour[b] == colour[a]) {
          return std::nullopt;
        }
      }
    }
  }
  std::vector<std::size_t> index(I);
  BipartiteSides out;
  for (std::size_t i = 0; i < I; ++i) {
    if (colour[i] == 0) {
      index[i] = out.top_rates.size();
      out.top_rates.push_back(s.arrivals.mean()[i]);
    } else {
      index[i] = out.bottom_rates.size();
      out.bottom_rates.push_back(s.arrivals.mean()[i]);
    }
  }
  for (auto [a, b] : pairs) {
    if (colour[a] == 1) std::swap(a, b);
    out.edges.emplace_back(index[a], index[b]);
  }
  return out;
}

// ---------------------------------------------------------------- sweeps

std::vector<SweepRow> beta_sweep(const Scenario& s, std::vector<double> betas, int replicates, unsigned threads) {
  for (double b : betas) {
    if (!(b > 0.0)) throw std::invalid_argument("sweep betas must be positive");
  }
  if (replicates < 1) throw std::invalid_argument("replicates must be positive");
  std::sort(betas.begin(), betas.end());
  const std::size_t tasks = betas.size() * static_cast<std::size_t>(replicates);
  std::vector<SweepRow> partial(tasks);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t task = next++; task < tasks; task = next++) {
      const std::size_t b = task / static_cast<std::size_t>(replicates);
      const auto r = static_cast<std::uint64_t>(task % static_cast<std::size_t>(replicates));
      Scenario run_s = s;
      run_s.beta = betas[b];
      run_s.seed = Rng::derive(s.seed, r);
      SchemeConfig cfg;
      cfg.stride = 0;
      const SchemeRun run = run_scheme(run_s, cfg);
      SweepRow& row = partial[task];
      row.beta = betas[b];
      row.avg_reward = run.average_reward();
      row.avg_holding_cost = run.average_holding_cost();
      row.avg_profit = row.avg_reward - row.avg_holding_cost;
      row.mean_abs_q = run.mean_abs_queue();
      row.invariant_violations = run.invariants.violations();
      row.slots = run.final_state.metrics.slots;
    }
  };
  unsigned n = threads ? threads : std::max(1U, std::thread::hardware_concurrency());
  n = static_cast<unsigned>(std::min<std::size_t>(n, tasks));
  std::vector<std::thread> pool;
  for (unsigned i = 1; i < n; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  // Replicate averages, reduced in a fixed order.
  std::vector<SweepRow> rows(betas.size());
  for (std::size_t b = 0; b < betas.size(); ++b) {
    SweepRow& row = rows[b];
    row.beta = betas[b];
    for (int r = 0; r < replicates; ++r) {
      const SweepRow& p = partial[b * static_cast<std::size_t>(replicates) + static_cast<std::size_t>(r)];
      row.avg_reward += p.avg_reward / replicates;
      row.avg_holding_cost += p.avg_holding_cost / replicates;
      row.avg_profit += p.avg_profit / replicates;
      row.mean_abs_q += p.mean_abs_q / replicates;
      row.invariant_violations += p.invariant_violations;
      row.slots += p.slots;
    }
  }
  return rows;
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  CsvWriter csv(out);
  csv.header({"beta", "avg_reward", "avg_holding_cost", "avg_profit", "mean_abs_q"});
  for (const auto& r : rows) {
    csv.field(r.beta).field(r.avg_reward).field(r.avg_holding_cost).field(r.avg_profit).field(r.mean_abs_q);
    csv.end_row();
  }
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2) throw std::invalid_argument("spearman needs two equal series");
  auto ranks = [](const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t x, std::size_t y) { return v[x] < v[y]; });
    Vec r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
      std::size_t j = i;
      while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
      for (std::size_t k = i; k <= j; ++k) r[idx[k]] = 0.5 * static_cast<double>(i + j);
      i = j + 1;
    }
    return r;
  };
  const Vec ra = ranks(a), rb = ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  return (saa == 0.0 || sbb == 0.0) ? 0.0 : sab / std::sqrt(saa * sbb);
}

// ---------------------------------------------------------------- reports

std::string scenario_digest(const Scenario& s) {
  std::string text;
  try {
    text = dump_scenario(s);
  } catch (const std::invalid_argument&) {
    text = s.name + ":" + s.utility.name();
  }
  text += "#seed=" + std::to_string(s.seed);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

bool RunReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
}

std::string RunReport::to_json(bool deterministic) const {
  nlohmann::ordered_json j;
  j["name"] = name;
  j["digest"] = digest;
  j["seed"] = seed;
  if (!deterministic) j["wall_seconds"] = wall_seconds;
  j["avg_reward"] = avg_reward;
  j["internal_average"] = internal_average;
  j["avg_holding_cost"] = avg_holding_cost;
  j["virtual_rates"] = virtual_rates;
  j["completed_rates"] = completed_rates;
  if (lp_value) {
    j["lp_value"] = *lp_value;
    j["lp_rates"] = lp_rates;
  }
  if (!sweep.empty()) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& r : sweep) {
      arr.push_back({{"beta", r.beta},
                     {"avg_reward", r.avg_reward},
                     {"avg_holding_cost", r.avg_holding_cost},
                     {"avg_profit", r.avg_profit},
                     {"mean_abs_q", r.mean_abs_q}});
    }
    j["sweep"] = arr;
  }
  j["invariants"] = {{"checks", invariants.checks},
                     {"pending_bound", invariants.pending_bound},
                     {"physical_bound", invariants.physical_bound},
                     {"conservation", invariants.conservation},
                     {"dominance", invariants.dominance},
                     {"count_identity", invariants.count_identity}};
  auto checks_json = nlohmann::ordered_json::array();
  for (const auto& c : checks) checks_json.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
  j["checks"] = checks_json;
  j["passed"] = passed();
  return j.dump(2);
}

RunReport simulate_report(const Scenario& s, const SchemeRun& run) {
  RunReport r;
  r.name = s.name;
  r.digest = scenario_digest(s);
  r.seed = s.seed;
  r.avg_reward = run.average_reward();
  // X averages per decision round; scaled to per slot.
  r.internal_average = s.m * std::accumulate(run.final_state.v.X.begin(), run.final_state.v.X.end(), 0.0);
  r.avg_holding_cost = run.average_holding_cost();
  r.virtual_rates = run.virtual_rates();
  r.completed_rates = run.completed_rates();
  r.invariants = run.invariants;
  if (s.utility.is_linear()) {
    try {
      const auto lp = solve_matching_lp(s);
      r.lp_value = lp.value;
      r.lp_rates = lp.rates;
    } catch (const InfeasibleError&) {
    }
  }
  // Queues that keep growing signal an unstable run.
  double growth = 0.0;
  if (run.rows.size() >= 4) {
    const auto& mid = run.rows[run.rows.size() / 2];
    const auto& end = run.rows.back();
    double a = 0.0, b = 0.0;
    for (double q : mid.Qhat) a += q;
    for (double q : end.Qhat) b += q;
    growth = (b - a) / static_cast<double>(std::max<std::int64_t>(1, end.t - mid.t));
  }
  r.checks.push_back({"stable", growth < 0.01, "physical queue growth per slot " + format_double(growth)});
  r.checks.push_back({"invariants", run.invariants.violations() == 0,
                      std::to_string(run.invariants.violations()) + " violations in " +
                          std::to_string(run.invariants.checks) + " slot checks"});
  return r;
}

std::vector<std::string> preset_names() { return {"expA", "expB_beta_sweep", "expC_rate_change", "bipartite_profit"}; }

std::filesystem::path default_output_dir() {
  const char* env = std::getenv("EGPD_OUT_DIR");
  return env && *env ? std::filesystem::path(env) : std::filesystem::path("out");
}

namespace {

std::string fmt_vec(const Vec& v) {
  std::string s = "(";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + format_double(std::round(v[i] * 1e5) / 1e5);
  return s + ")";
}

double max_abs_diff(const Vec& a, const Vec& b, std::size_t from = 0) {
  double d = 0.0;
  for (std::size_t i = from; i < a.size(); ++i) d = std::max(d, std::fabs(a[i] - b[i - from]));
  return d;
}

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

RunReport preset_exp_a(const std::optional<std::filesystem::path>& out) {
  const Scenario s = experiment_a();
  const SchemeRun run = run_scheme(s);
  RunReport r = simulate_report(s, run);
  const double target = 10.8;
  r.checks.push_back({"lp value", r.lp_value && std::fabs(*r.lp_value - target) <= 1e-9,
                      "value " + format_double(r.lp_value.value_or(NAN))});
  r.checks.push_back({"average reward within 2%", std::fabs(r.avg_reward - target) <= 0.02 * target,
                      "average reward " + format_double(r.avg_reward)});
  const double dev = max_abs_diff(r.completed_rates, experiment_a_table_rates(), 1);
  r.checks.push_back({"rates within 0.05 of reference", dev <= 0.05,
                      "completed " + fmt_vec(r.completed_rates) + ", max deviation " + format_double(dev)});
  if (out) {
    std::ofstream csv(*out / "expA_metrics.csv");
    write_metrics_csv(csv, run, s);
  }
  return r;
}

RunReport preset_exp_b(const std::optional<std::filesystem::path>& out) {
  const Scenario s = experiment_a();
  RunReport r;
  r.name = "expB_beta_sweep";
  r.digest = scenario_digest(s);
  r.seed = s.seed;
  r.sweep = beta_sweep(s, experiment_b_betas());
  const double target = 10.8;
  auto reward_at = [&](double b) {
    for (const auto& row : r.sweep)
      if (row.beta == b) return row;
    throw std::logic_error("beta missing from sweep");
  };
  bool small_ok = true, large_ok = true;
  std::string small_detail, large_detail;
  const double base = reward_at(0.01).avg_reward;
  for (const auto& row : r.sweep) {
    if (row.beta <= 1.0) {
      small_ok = small_ok && row.avg_reward >= 0.95 * target;
      small_detail += format_double(row.beta) + ":" + format_double(row.avg_reward) + " ";
    }
    if (row.beta >= 10.0) {
      large_ok = large_ok && row.avg_reward <= base - 0.5;
      large_detail += format_double(row.beta) + ":" + format_double(row.avg_reward) + " ";
    }
  }
  r.checks.push_back({"reward near optimal for beta <= 1", small_ok, small_detail});
  r.checks.push_back({"lower plateau for beta >= 10", large_ok, large_detail});
  const double ratio = reward_at(0.01).mean_abs_q / reward_at(0.1).mean_abs_q;
  r.checks.push_back({"queue ratio in [3, 30]", ratio >= 3.0 && ratio <= 30.0, "ratio " + format_double(ratio)});
  std::int64_t violations = 0;
  for (const auto& row : r.sweep) violations += row.invariant_violations;
  r.invariants.checks = 0;
  for (const auto& row : r.sweep) r.invariants.checks += row.slots;
  r.checks.push_back({"invariants", violations == 0, std::to_string(violations) + " violations"});
  if (out) {
    std::ofstream csv(*out / "expB_sweep.csv");
    write_sweep_csv(csv, r.sweep);
  }
  return r;
}

RunReport preset_exp_c(const std::optional<std::filesystem::path>& out) {
  const Scenario s = experiment_c();
  SchemeConfig cfg;
  cfg.snapshots = {6000, 10000};
  const SchemeRun run = run_scheme(s, cfg);
  RunReport r = simulate_report(s, run);
  const MatchingLpSolution after = solve_matching_lp(s, experiment_c_new_rates());
  r.lp_value = after.value;
  r.lp_rates = after.rates;
  const Vec window = window_rates(run, 6000, 10000);
  const double dev = max_abs_diff(window, after.rates);
  r.checks.push_back({"window rates within 0.1 of new optimum", dev <= 0.1,
                      "window " + fmt_vec(window) + " vs " + fmt_vec(after.rates) + ", max deviation " +
                          format_double(dev)});
  if (out) {
    std::ofstream csv(*out / "expC_metrics.csv");
    write_metrics_csv(csv, run, s);
  }
  return r;
}

RunReport preset_bipartite(const std::optional<std::filesystem::path>& out) {
  const Scenario s = bipartite_scenario();
  RunReport r;
  r.name = "bipartite_profit";
  r.digest = scenario_digest(s);
  r.seed = s.seed;
  const MatchingLpSolution lp = solve_matching_lp(s);
  r.lp_value = lp.value;
  r.lp_rates = lp.rates;

  const BipartiteSides sides = bipartite_sides(s);
  const NcondReport ncond = check_ncond(sides.top_rates, sides.bottom_rates, sides.edges);
  r.checks.push_back({"stabilizability condition", ncond.stabilizable, ""});
  const MappedNetwork mapped = map_to_network(s);
  const auto raw = check_drift_condition(mapped.net, 1e-6);
  const auto reduced = reduce_drift_subspace(mapped.net);
  const auto red = check_drift_condition(reduced.reduced, 1e-6);
  r.checks.push_back({"drift condition after reduction", !raw.holds && red.holds,
                      "raw margin " + format_double(raw.margin) + ", reduced margin " + format_double(red.margin) +
                          " in dimension " + std::to_string(reduced.dimension())});

  r.sweep = beta_sweep(s, bipartite_betas());
  std::vector<double> betas, cost, reward, profit;
  for (const auto& row : r.sweep) {
    betas.push_back(row.beta);
    cost.push_back(row.avg_holding_cost);
    reward.push_back(row.avg_reward);
    profit.push_back(row.avg_profit);
  }
  const double rho = spearman(betas, cost);
  r.checks.push_back({"holding cost decreasing in beta", rho <= -0.9, "spearman " + format_double(rho)});
  bool nonincreasing = true;
  for (std::size_t i = 1; i < reward.size(); ++i) nonincreasing = nonincreasing && reward[i] <= reward[i - 1];
  r.checks.push_back({"reward non-increasing in beta", nonincreasing, fmt_vec(reward)});
  const auto best = static_cast<std::size_t>(std::max_element(profit.begin(), profit.end()) - profit.begin());
  r.checks.push_back({"profit peaks at an interior beta", best > 0 && best + 1 < profit.size(),
                      "argmax beta " + format_double(betas[best]) + ", profits " + fmt_vec(profit)});
  std::int64_t violations = 0;
  for (const auto& row : r.sweep) {
    violations += row.invariant_violations;
    r.invariants.checks += row.slots;
  }
  r.checks.push_back({"invariants", violations == 0, std::to_string(violations) + " violations"});
  if (out) {
    std::ofstream csv(*out / "bipartite_sweep.csv");
    write_sweep_csv(csv, r.sweep);
  }
  return r;
}

}  // namespace

RunReport run_preset(const std::string& name, const std::optional<std::filesystem::path>& out_dir) {
  const auto start = std::chrono::steady_clock::now();
  if (out_dir) std::filesystem::create_directories(*out_dir);
  RunReport r;
  if (name == "expA") r = preset_exp_a(out_dir);
  else if (name == "expB_beta_sweep") r = preset_exp_b(out_dir);
  else if (name == "expC_rate_change") r = preset_exp_c(out_dir);
  else if (name == "bipartite_profit") r = preset_bipartite(out_dir);
  else throw std::invalid_argument("unknown preset '" + name + "'");
  r.name = name;
  r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (out_dir) write_text(*out_dir / (name + "_report.json"), r.to_json() + "\n");
  return r;
}

}  // namespace egpd
