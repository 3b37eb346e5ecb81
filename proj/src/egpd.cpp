#include "egpd/egpd.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "egpd/csv.hpp"

namespace egpd {

Decision argmax_decision(Vec scores) {
  if (scores.empty()) throw std::invalid_argument("no controls to choose from");
  double best = scores[0], scale = 0.0;
  for (double s : scores) {
    best = std::max(best, s);
    scale = std::max(scale, std::fabs(s));
  }
  const double tol = kTieTolerance * (1.0 + scale);
  Decision d;
  d.score_max = best;
  for (std::size_t k = 0; k < scores.size(); ++k) {
    if (scores[k] >= best - tol) d.ties.push_back(k);
  }
  d.control = d.ties.front();
  d.scores = std::move(scores);
  return d;
}

Decision select_control(const NetState& state, const NetworkModel& net, const UtilitySpec& utility,
                        double beta, std::span<const double> gamma) {
  const std::size_t n = net.dimension();
  if (state.q.size() != n || state.x.size() != n) throw std::invalid_argument("state has wrong dimension");
  if (!gamma.empty() && gamma.size() != n) throw std::invalid_argument("gamma has wrong dimension");
  if (!utility.in_domain(state.x)) throw DomainError("running average left the utility domain");
  Vec dir = utility.gradient(state.x);
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(dir[i])) {
      throw DomainError("non-finite utility gradient at coordinate " + std::to_string(i));
    }
    dir[i] -= beta * (gamma.empty() ? 1.0 : gamma[i]) * state.q[i];
  }
  Vec scores(net.num_controls());
  for (std::size_t k = 0; k < scores.size(); ++k) scores[k] = dot(dir, net.mean_increment(k));
  return argmax_decision(std::move(scores));
}

void apply_increment(NetState& state, const NetworkModel& net, std::size_t control,
                     std::span<const double> lambda, double beta) {
  const Control& c = net.control(control);
  const std::size_t nc = net.n_constrained();
  for (std::size_t i = 0; i < net.dimension(); ++i) {
    const double b = lambda[i] - c.mu[i];
    if (i < nc) {
      state.q[i] = std::max(state.q[i] - c.mu[i], 0.0) + lambda[i];
      if (state.q[i] < 0.0) throw std::logic_error("constrained queue became negative");
    } else {
      state.q[i] += b;
    }
    state.x[i] = (1.0 - beta) * state.x[i] + beta * b;
  }
  ++state.t;
}

NetState step(NetState state, const NetworkModel& net, const Decision& decision, double beta, Rng& rng) {
  Vec lambda(net.dimension(), 0.0);
  if ((state.t + 1) % net.rounds_per_slot() == 0) {
    net.control(decision.control).arrivals.sample(rng, lambda);
  }
  apply_increment(state, net, decision.control, lambda, beta);
  return state;
}

EgpdRun run_egpd(const NetworkModel& net, const UtilitySpec& utility, const EgpdConfig& config) {
  const std::size_t n = net.dimension();
  NetState state;
  state.x = config.x0.empty() ? Vec(n, 0.0) : config.x0;
  state.q = config.q0.empty() ? Vec(n, 0.0) : config.q0;
  if (state.x.size() != n || state.q.size() != n) throw std::invalid_argument("initial state has wrong dimension");
  for (std::size_t i = 0; i < net.n_constrained(); ++i) {
    if (state.q[i] < 0.0) throw std::invalid_argument("initial constrained queue is negative");
  }
  if (!(config.beta > 0.0)) throw std::invalid_argument("beta must be positive");

  EgpdRun run;
  run.activations.assign(net.num_controls(), 0);
  if (config.stride > 0) run.trace.push_back({0, -1, state.q, state.x});
  if (config.record_controls) run.controls.reserve(static_cast<std::size_t>(config.horizon));

  Rng rng(config.seed, 0);
  for (std::int64_t t = 0; t < config.horizon; ++t) {
    const Decision d = select_control(state, net, utility, config.beta, config.gamma);
    state = step(std::move(state), net, d, config.beta, rng);
    ++run.activations[d.control];
    if (config.record_controls) run.controls.push_back(static_cast<std::uint32_t>(d.control));
    if (config.stride > 0 && (state.t % config.stride == 0 || t + 1 == config.horizon)) {
      run.trace.push_back({state.t, static_cast<std::int64_t>(d.control), state.q, state.x, d.score_max});
    }
  }
  run.final_state = std::move(state);
  return run;
}

void write_trace_csv(std::ostream& out, const EgpdRun& run, std::size_t dimension) {
  CsvWriter csv(out);
  std::vector<std::string> header{"t", "control"};
  for (std::size_t i = 1; i <= dimension; ++i) header.push_back("q_" + std::to_string(i));
  for (std::size_t i = 1; i <= dimension; ++i) header.push_back("x_" + std::to_string(i));
  header.push_back("score_max");
  csv.header(header);
  for (const auto& row : run.trace) {
    csv.field(row.t).field(row.control);
    for (double v : row.q) csv.field(v);
    for (double v : row.x) csv.field(v);
    csv.field(row.score_max);
    csv.end_row();
  }
}

}  // namespace egpd
