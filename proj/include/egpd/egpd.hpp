#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <span>
#include <vector>

#include "egpd/model.hpp"

namespace egpd {

struct NetState {
  Vec q;
  Vec x;
  std::int64_t t = 0;  // decision rounds taken
};

struct Decision {
  std::size_t control = 0;
  Vec scores;
  std::vector<std::size_t> ties;
  double score_max = 0.0;
};

/// Relative tolerance used to call two control scores equal.
inline constexpr double kTieTolerance = 1e-9;

/// Index of the best score; all scores within the tie tolerance of it are
/// reported and the lowest index wins.
Decision argmax_decision(Vec scores);

Decision select_control(const NetState& state, const NetworkModel& net, const UtilitySpec& utility,
                        double beta, std::span<const double> gamma);

/// Applies one realized arrival vector for the chosen control.
void apply_increment(NetState& state, const NetworkModel& net, std::size_t control,
                     std::span<const double> lambda, double beta);

/// Draws lambda(k) on the last round of each slot (zero otherwise) and applies it.
NetState step(NetState state, const NetworkModel& net, const Decision& decision, double beta, Rng& rng);

struct EgpdConfig {
  double beta = 0.01;
  Vec gamma;  // empty: all ones
  std::int64_t horizon = 0;
  std::uint64_t seed = 1;
  Vec x0;  // empty: zeros
  Vec q0;  // empty: zeros
  std::int64_t stride = 1;  // trace sampling; 0 disables the trace
  bool record_controls = false;
};

struct TraceRow {
  std::int64_t t = 0;
  std::int64_t control = -1;  // -1 for the initial state
  Vec q;
  Vec x;
  double score_max = std::numeric_limits<double>::quiet_NaN();
};

struct EgpdRun {
  std::vector<TraceRow> trace;
  std::vector<std::int64_t> activations;
  std::vector<std::uint32_t> controls;  // full decision sequence when requested
  NetState final_state;
};

EgpdRun run_egpd(const NetworkModel& net, const UtilitySpec& utility, const EgpdConfig& config);

void write_trace_csv(std::ostream& out, const EgpdRun& run, std::size_t dimension);

}  // namespace egpd
