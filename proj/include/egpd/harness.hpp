#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "egpd/matching.hpp"
#include "egpd/model.hpp"

namespace egpd {

// Reference scenarios.
Scenario experiment_a();              // four item types, eight matchings, beta 0.01, m 4
Scenario experiment_c();              // experiment A at beta 0.1 with a rate change at slot 2000
Scenario bipartite_scenario();        // eight item types in pairs, nine pair matchings, m 2
Vec experiment_a_table_rates();       // reference activation rates, matchings 1..7
Vec experiment_c_new_rates();
std::vector<double> experiment_b_betas();
std::vector<double> bipartite_betas();

/// Top/bottom split of the bipartite example for the stabilizability check.
struct BipartiteSides {
  Vec top_rates;
  Vec bottom_rates;
  std::vector<std::pair<std::size_t, std::size_t>> edges;
};
BipartiteSides bipartite_sides(const Scenario& s);
/// Infers the two sides by 2-colouring the pair matchings; nullopt if not bipartite.
std::optional<BipartiteSides> infer_bipartition(const Scenario& s);

struct SweepRow {
  double beta = 0.0;
  double avg_reward = 0.0;
  double avg_holding_cost = 0.0;
  double avg_profit = 0.0;
  double mean_abs_q = 0.0;
  std::int64_t invariant_violations = 0;
  std::int64_t slots = 0;
};

/// Independent runs per beta on a worker pool; replicate r of every beta uses
/// the stream derived from (seed, r). Rows sorted by beta.
std::vector<SweepRow> beta_sweep(const Scenario& s, std::vector<double> betas, int replicates = 1,
                                 unsigned threads = 0);

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);

struct Check {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct RunReport {
  std::string name;
  std::string digest;
  std::uint64_t seed = 0;
  double wall_seconds = 0.0;
  double avg_reward = 0.0;
  double internal_average = 0.0;  // m * sum_j X_j at the end of the run
  double avg_holding_cost = 0.0;
  Vec virtual_rates;
  Vec completed_rates;
  std::optional<double> lp_value;
  Vec lp_rates;
  std::vector<SweepRow> sweep;
  InvariantTally invariants;
  std::vector<Check> checks;

  bool passed() const;
  /// JSON text; the wall time is left out when deterministic is set.
  std::string to_json(bool deterministic = false) const;
};

/// 64-bit FNV-1a of the scenario text and seed.
std::string scenario_digest(const Scenario& s);

RunReport simulate_report(const Scenario& s, const SchemeRun& run);

std::vector<std::string> preset_names();

/// Runs a named preset and evaluates its reference checks. When out_dir is
/// set, CSV and JSON artifacts are written there.
RunReport run_preset(const std::string& name, const std::optional<std::filesystem::path>& out_dir = std::nullopt);

/// EGPD_OUT_DIR, or "out" when unset.
std::filesystem::path default_output_dir();

double spearman(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace egpd
