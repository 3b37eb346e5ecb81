#include "egpd/matching.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "egpd/csv.hpp"

namespace egpd {

SchemeState SchemeState::initial(const Scenario& s) {
  const std::size_t I = s.num_items();
  const std::size_t J = s.num_matchings();
  SchemeState st;
  st.v.Q.assign(I, 0.0);
  st.v.X.assign(J, 0.0);
  st.p.Qhat.assign(I, 0.0);
  st.p.pending_load.assign(I, 0.0);
  st.metrics.virtual_counts.assign(J, 0);
  st.metrics.completed_counts.assign(J, 0);
  return st;
}

Decision matching_scores(const VirtualState& v, const Scenario& s) {
  if (!s.utility.in_domain(v.X)) throw DomainError("running reward averages left the utility domain");
  const Vec grad = s.utility.gradient(v.X);
  const std::size_t J = s.num_matchings();
  Vec scores(J);
  for (std::size_t j = 0; j < J; ++j) {
    if (!std::isfinite(grad[j])) {
      throw DomainError("non-finite utility gradient at coordinate " + std::to_string(j));
    }
    double sc = grad[j] * s.matchings[j].reward;
    const Vec& mu = s.matchings[j].mu;
    for (std::size_t i = 0; i < mu.size(); ++i) {
      if (mu[i] != 0.0) sc += s.beta * s.gamma[i] * v.Q[i] * mu[i];
    }
    scores[j] = sc;
  }
  return argmax_decision(std::move(scores));
}

std::size_t select_matching(const VirtualState& v, const Scenario& s) {
  return matching_scores(v, s).control;
}

void virtual_step(VirtualState& v, const Scenario& s, std::size_t j, std::span<const double> lambda) {
  const Vec& mu = s.matchings.at(j).mu;
  for (std::size_t i = 0; i < v.Q.size(); ++i) v.Q[i] += lambda[i] - mu[i];
  for (double& x : v.X) x *= (1.0 - s.beta);
  v.X[j] += s.beta * s.matchings[j].reward;
}

namespace {

bool completable(const Vec& qhat, const Vec& mu) {
  for (std::size_t i = 0; i < mu.size(); ++i) {
    if (mu[i] > 0.0 && qhat[i] < mu[i]) return false;
  }
  return true;
}

void activate(SchemeState& st, const Scenario& s, std::size_t j) {
  const Vec& mu = s.matchings[j].mu;
  for (std::size_t i = 0; i < mu.size(); ++i) st.v.Q[i] -= mu[i];
  for (double& x : st.v.X) x *= (1.0 - s.beta);
  st.v.X[j] += s.beta * s.matchings[j].reward;
  ++st.metrics.virtual_counts[j];
  st.metrics.virtual_reward += s.matchings[j].reward;
  if (j == 0) {
    // The empty matching needs no items and completes at once.
    ++st.metrics.completed_counts[0];
    return;
  }
  st.p.pending.push_back(j);
  for (std::size_t i = 0; i < mu.size(); ++i) st.p.pending_load[i] += mu[i];
}

}  // namespace

std::optional<std::size_t> complete_one(PhysicalState& p, const Scenario& s, CompletionPolicy policy) {
  auto chosen = p.pending.end();
  double best = -INFINITY;
  for (auto it = p.pending.begin(); it != p.pending.end(); ++it) {
    const Vec& mu = s.matchings[*it].mu;
    if (!completable(p.Qhat, mu)) continue;
    if (policy == CompletionPolicy::Fcfs) {
      chosen = it;
      break;
    }
    const double cost = s.holding_costs.empty() ? 0.0 : dot(s.holding_costs, mu);
    if (cost > best + 1e-12) {
      best = cost;
      chosen = it;
    }
  }
  if (chosen == p.pending.end()) return std::nullopt;
  const std::size_t j = *chosen;
  const Vec& mu = s.matchings[j].mu;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    p.Qhat[i] -= mu[i];
    p.pending_load[i] -= mu[i];
  }
  p.pending.erase(chosen);
  return j;
}

namespace {

void complete_pending(SchemeState& st, const Scenario& s) {
  while (const auto done = complete_one(st.p, s, s.completion_policy)) {
    ++st.metrics.completed_counts[*done];
    st.metrics.completed_reward += s.matchings[*done].reward;
    if (s.completion_scan == CompletionScan::Single) break;
  }
}

}  // namespace

void scheme_step(SchemeState& st, const Scenario& s, const ArrivalModel& arrivals, Rng& rng,
                 std::vector<std::uint32_t>* decisions) {
  for (int r = 0; r < s.m; ++r) {
    const std::size_t j = select_matching(st.v, s);
    if (decisions) decisions->push_back(static_cast<std::uint32_t>(j));
    activate(st, s, j);
    complete_pending(st, s);
  }
  Vec lambda(s.num_items());
  arrivals.sample(rng, lambda);
  for (std::size_t i = 0; i < lambda.size(); ++i) {
    st.v.Q[i] += lambda[i];
    st.p.Qhat[i] += lambda[i];
  }
  if (s.completion_scan == CompletionScan::Restart) complete_pending(st, s);
  ++st.v.t;
  ++st.metrics.slots;
  if (!s.holding_costs.empty()) st.metrics.holding_cost += dot(s.holding_costs, st.p.Qhat);
  for (double q : st.v.Q) st.metrics.abs_queue_sum += std::fabs(q);
}

void check_invariants(const SchemeState& st, const Scenario& s, InvariantTally& tally) {
  const std::size_t I = s.num_items();
  ++tally.checks;
  Vec load(I, 0.0);
  std::vector<std::int64_t> pending_count(s.num_matchings(), 0);
  for (std::size_t j : st.p.pending) {
    ++pending_count[j];
    for (std::size_t i = 0; i < I; ++i) load[i] += s.matchings[j].mu[i];
  }
  double neg = 0.0, pos = 0.0, physical = 0.0;
  bool conserved = true, dominated = true;
  for (std::size_t i = 0; i < I; ++i) {
    const double q = st.v.Q[i], qh = st.p.Qhat[i];
    neg += std::max(-q, 0.0);
    pos += std::max(q, 0.0);
    physical += qh;
    const double tol = 1e-9 * (1.0 + std::fabs(q) + std::fabs(qh));
    if (std::fabs(qh - q - load[i]) > tol) conserved = false;
    if (q > qh + tol) dominated = false;
  }
  const double tol = 1e-9 * (1.0 + pos + neg);
  if (static_cast<double>(st.p.qhat0()) > neg + tol) ++tally.pending_bound;
  if (physical > pos + s.mu_star() * neg + tol) ++tally.physical_bound;
  if (!conserved) ++tally.conservation;
  if (!dominated) ++tally.dominance;
  for (std::size_t j = 0; j < s.num_matchings(); ++j) {
    if (st.metrics.virtual_counts[j] - st.metrics.completed_counts[j] != pending_count[j]) {
      ++tally.count_identity;
      break;
    }
  }
}

namespace {

MetricsRow make_row(const SchemeState& st) {
  MetricsRow r;
  r.t = st.v.t;
  r.virtual_counts = st.metrics.virtual_counts;
  r.completed_counts = st.metrics.completed_counts;
  r.completed_reward = st.metrics.completed_reward;
  r.holding_cost = st.metrics.holding_cost;
  r.internal_average = std::accumulate(st.v.X.begin(), st.v.X.end(), 0.0);
  r.Q = st.v.Q;
  r.Qhat = st.p.Qhat;
  r.qhat0 = st.p.qhat0();
  return r;
}

}  // namespace

SchemeRun run_scheme(const Scenario& s, const SchemeConfig& config) {
  if (const auto diags = validate_scenario(s); !diags.empty()) {
    throw std::invalid_argument("invalid scenario: " + diags.front().field + ": " + diags.front().message);
  }
  std::vector<RateChange> changes = s.rate_changes;
  std::stable_sort(changes.begin(), changes.end(),
                   [](const RateChange& a, const RateChange& b) { return a.slot < b.slot; });

  SchemeRun run;
  run.final_state = SchemeState::initial(s);
  SchemeState& st = run.final_state;
  auto keep = [&](std::int64_t t) {
    return (config.stride > 0 && (t % config.stride == 0 || t == s.horizon)) ||
           std::find(config.snapshots.begin(), config.snapshots.end(), t) != config.snapshots.end();
  };
  if (keep(0)) run.rows.push_back(make_row(st));
  if (config.record_decisions) run.decisions.reserve(static_cast<std::size_t>(s.horizon * s.m));

  Rng rng(s.seed, 0);
  const ArrivalModel* arrivals = &s.arrivals;
  std::size_t next_change = 0;
  for (std::int64_t t = 0; t < s.horizon; ++t) {
    while (next_change < changes.size() && changes[next_change].slot <= t) {
      arrivals = &changes[next_change++].arrivals;
    }
    scheme_step(st, s, *arrivals, rng, config.record_decisions ? &run.decisions : nullptr);
    if (config.check_invariants) check_invariants(st, s, run.invariants);
    if (keep(st.v.t)) run.rows.push_back(make_row(st));
  }
  return run;
}

const MetricsRow* SchemeRun::row_at(std::int64_t t) const {
  for (const auto& r : rows)
    if (r.t == t) return &r;
  return nullptr;
}

double SchemeRun::average_reward() const {
  const auto& m = final_state.metrics;
  return m.slots ? m.completed_reward / static_cast<double>(m.slots) : 0.0;
}

double SchemeRun::average_holding_cost() const {
  const auto& m = final_state.metrics;
  return m.slots ? m.holding_cost / static_cast<double>(m.slots) : 0.0;
}

namespace {

Vec rates(const std::vector<std::int64_t>& counts, std::int64_t slots) {
  Vec r(counts.size(), 0.0);
  if (slots == 0) return r;
  for (std::size_t j = 0; j < counts.size(); ++j) r[j] = static_cast<double>(counts[j]) / static_cast<double>(slots);
  return r;
}

}  // namespace

Vec SchemeRun::completed_rates() const {
  return rates(final_state.metrics.completed_counts, final_state.metrics.slots);
}

Vec SchemeRun::virtual_rates() const {
  return rates(final_state.metrics.virtual_counts, final_state.metrics.slots);
}

double SchemeRun::mean_abs_queue() const {
  const auto& m = final_state.metrics;
  return m.slots ? m.abs_queue_sum / static_cast<double>(m.slots) : 0.0;
}

Vec window_rates(const SchemeRun& run, std::int64_t from, std::int64_t to) {
  const MetricsRow* a = run.row_at(from);
  const MetricsRow* b = run.row_at(to);
  if (!a || !b || to <= from) throw std::invalid_argument("window endpoints were not recorded");
  Vec r(a->completed_counts.size());
  for (std::size_t j = 0; j < r.size(); ++j) {
    r[j] = static_cast<double>(b->completed_counts[j] - a->completed_counts[j]) / static_cast<double>(to - from);
  }
  return r;
}

void write_metrics_csv(std::ostream& out, const SchemeRun& run, const Scenario& s) {
  CsvWriter csv(out);
  std::vector<std::string> header{"t"};
  for (std::size_t j = 0; j < s.num_matchings(); ++j) header.push_back("virtual_rate_" + std::to_string(j));
  for (std::size_t j = 0; j < s.num_matchings(); ++j) header.push_back("completed_rate_" + std::to_string(j));
  header.insert(header.end(), {"avg_reward", "avg_holding_cost", "avg_profit"});
  for (std::size_t i = 1; i <= s.num_items(); ++i) header.push_back("Q_" + std::to_string(i));
  for (std::size_t i = 1; i <= s.num_items(); ++i) header.push_back("Qhat_" + std::to_string(i));
  header.push_back("Qhat0");
  csv.header(header);
  for (const auto& r : run.rows) {
    const double t = r.t > 0 ? static_cast<double>(r.t) : 1.0;
    csv.field(r.t);
    for (auto c : r.virtual_counts) csv.field(static_cast<double>(c) / t);
    for (auto c : r.completed_counts) csv.field(static_cast<double>(c) / t);
    csv.field(r.completed_reward / t).field(r.holding_cost / t).field((r.completed_reward - r.holding_cost) / t);
    for (double q : r.Q) csv.field(q);
    for (double q : r.Qhat) csv.field(q);
    csv.field(static_cast<std::int64_t>(r.qhat0));
    csv.end_row();
  }
}

// ---------------------------------------------------------------- mapping

NetState MappedNetwork::embed(const VirtualState& v, std::span<const double> free_x) const {
  NetState st;
  st.q.assign(J + I, 0.0);
  st.x.assign(J + I, 0.0);
  for (std::size_t j = 0; j < J; ++j) st.x[j] = v.X[j] - c;
  for (std::size_t i = 0; i < I; ++i) {
    st.q[J + i] = v.Q[i];
    if (!free_x.empty()) st.x[J + i] = free_x[i];
  }
  st.t = v.t * net.rounds_per_slot();
  return st;
}

MappedNetwork map_to_network(const Scenario& s, std::optional<double> c) {
  return map_to_network(s, s.arrivals, c);
}

MappedNetwork map_to_network(const Scenario& s, const ArrivalModel& arrivals, std::optional<double> c) {
  const std::size_t J = s.num_matchings();
  const std::size_t I = s.num_items();
  double wmax = -INFINITY;
  for (const auto& mj : s.matchings) wmax = std::max(wmax, mj.reward);
  const double shift = c.value_or(wmax + 1.0);
  if (!(shift > wmax)) {
    throw std::invalid_argument("mapping constant c must exceed the largest reward");
  }

  // Item arrivals land on the free nodes; reward nodes receive nothing.
  Matrix embed_rows(J + I, Vec(I, 0.0));
  for (std::size_t i = 0; i < I; ++i) embed_rows[J + i][i] = 1.0;
  const ArrivalModel lifted = ArrivalModel::linear(arrivals, embed_rows);

  std::vector<Control> controls;
  for (std::size_t k = 0; k < J; ++k) {
    Vec mu(J + I, shift);
    mu[k] = shift - s.matchings[k].reward;
    for (std::size_t i = 0; i < I; ++i) mu[J + i] = s.matchings[k].mu[i];
    controls.push_back({s.matchings[k].label, std::move(mu), lifted});
  }
  Vec gamma(J, 1.0);
  gamma.insert(gamma.end(), s.gamma.begin(), s.gamma.end());
  return {NetworkModel(J, I, std::move(controls), s.m), s.utility.embedded(J + I, 0, J, shift),
          std::move(gamma), shift, J, I};
}

}  // namespace egpd
