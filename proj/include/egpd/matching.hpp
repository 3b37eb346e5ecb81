#pragma once

#include <cstdint>
#include <deque>
#include <iosfwd>
#include <optional>
#include <vector>

#include "egpd/egpd.hpp"
#include "egpd/model.hpp"

namespace egpd {

struct VirtualState {
  Vec Q;  // signed virtual queues, one per item type
  Vec X;  // running reward averages, one per matching
  std::int64_t t = 0;
};

struct PhysicalState {
  Vec Qhat;
  std::deque<std::size_t> pending;  // incomplete matchings, oldest first
  Vec pending_load;                 // sum of mu over pending

  std::size_t qhat0() const { return pending.size(); }
};

struct SchemeMetrics {
  std::vector<std::int64_t> virtual_counts;
  std::vector<std::int64_t> completed_counts;
  double virtual_reward = 0.0;
  double completed_reward = 0.0;
  double holding_cost = 0.0;
  double abs_queue_sum = 0.0;  // sum over slots of sum_i |Q_i|
  std::int64_t slots = 0;

  double profit() const { return completed_reward - holding_cost; }
};

struct SchemeState {
  VirtualState v;
  PhysicalState p;
  SchemeMetrics metrics;

  static SchemeState initial(const Scenario& s);
};

/// Matching scores: dG/dX_j w_j + sum_i beta gamma_i Q_i mu_i(j).
Decision matching_scores(const VirtualState& v, const Scenario& s);
std::size_t select_matching(const VirtualState& v, const Scenario& s);

/// Q += lambda - mu(j); X decays and X_j gains beta w_j.
void virtual_step(VirtualState& v, const Scenario& s, std::size_t j, std::span<const double> lambda);

/// Completes at most one pending matching; returns its index.
std::optional<std::size_t> complete_one(PhysicalState& p, const Scenario& s, CompletionPolicy policy);

/// One slot: m decision rounds, each followed by the completion scan, then
/// one batch arrival (and, under CompletionScan::Restart, a final scan).
/// `decisions` receives the m chosen matchings when non-null.
void scheme_step(SchemeState& state, const Scenario& s, const ArrivalModel& arrivals, Rng& rng,
                 std::vector<std::uint32_t>* decisions = nullptr);

struct InvariantTally {
  std::int64_t checks = 0;
  std::int64_t pending_bound = 0;    // Qhat0 <= sum Q^-
  std::int64_t physical_bound = 0;   // sum Qhat <= sum Q^+ + mu* sum Q^-
  std::int64_t conservation = 0;     // Qhat - Q == pending load
  std::int64_t dominance = 0;        // Q <= Qhat
  std::int64_t count_identity = 0;   // virtual - completed == pending count

  std::int64_t violations() const {
    return pending_bound + physical_bound + conservation + dominance + count_identity;
  }
};

void check_invariants(const SchemeState& state, const Scenario& s, InvariantTally& tally);

struct MetricsRow {
  std::int64_t t = 0;
  std::vector<std::int64_t> virtual_counts;
  std::vector<std::int64_t> completed_counts;
  double completed_reward = 0.0;
  double holding_cost = 0.0;
  double internal_average = 0.0;  // sum_j X_j
  Vec Q;
  Vec Qhat;
  std::size_t qhat0 = 0;
};

struct SchemeConfig {
  std::int64_t stride = 100;           // metrics row sampling; 0 disables
  std::vector<std::int64_t> snapshots; // extra slots whose rows are always kept
  bool record_decisions = false;
  bool check_invariants = true;
};

struct SchemeRun {
  std::vector<MetricsRow> rows;
  std::vector<std::uint32_t> decisions;
  SchemeState final_state;
  InvariantTally invariants;

  const MetricsRow* row_at(std::int64_t t) const;
  double average_reward() const;
  double average_holding_cost() const;
  Vec completed_rates() const;
  Vec virtual_rates() const;
  double mean_abs_queue() const;  // time average of sum_i |Q_i|
};

SchemeRun run_scheme(const Scenario& s, const SchemeConfig& config = {});

/// Per-slot completed rates between two recorded slots.
Vec window_rates(const SchemeRun& run, std::int64_t from, std::int64_t to);

void write_metrics_csv(std::ostream& out, const SchemeRun& run, const Scenario& s);

/// The matching system as a general network: J constrained reward nodes
/// followed by I free item nodes, m decision rounds per slot.
struct MappedNetwork {
  NetworkModel net;
  UtilitySpec utility;
  Vec gamma;
  double c = 0.0;
  std::size_t J = 0;
  std::size_t I = 0;

  NetState embed(const VirtualState& v, std::span<const double> free_x = {}) const;
};

MappedNetwork map_to_network(const Scenario& s, std::optional<double> c = std::nullopt);
MappedNetwork map_to_network(const Scenario& s, const ArrivalModel& arrivals, std::optional<double> c);

}  // namespace egpd
