#pragma once

#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <vector>

#include "egpd/model.hpp"
#include "egpd/oracle.hpp"

namespace egpd {

struct FluidState {
  Vec x;
  Vec q;
  double t = 0.0;
  Vec v;  // drift selected on the last step
};

enum class SelectionMode { LowestIndex, Averaged };

struct FluidOptions {
  double h = 1e-3;
  double t_end = 50.0;
  SelectionMode mode = SelectionMode::LowestIndex;
  /// Saddle point used for F*, B1..B3 and the optimal-face distance.
  std::optional<RateRegionSolution> saddle;
  /// Linear objective coefficients; enables rho(x, V*) when a saddle is given.
  Vec face_coefficients;
  int record_stride = 100;  // steps between recorded samples
  int rho_stride = 100;     // steps between rho evaluations (multiple of record_stride)
  double rho_tol = 1e-9;
  double in_region_threshold = 1e-6;  // rho below which x counts as inside V
};

struct LyapunovSample {
  double t = 0.0;
  Vec x;
  Vec q;
  std::int64_t vertex = -1;
  double F = 0.0;
  double Fstar = NAN;
  double B1 = NAN, B2 = NAN, B3 = NAN;
  double rho_V = NAN;
  double rho_Vstar = NAN;
};

struct FluidTrajectory {
  std::vector<LyapunovSample> samples;
  FluidState final_state;
  std::int64_t steps = 0;
  double rho0 = NAN;                    // rho(x0, V)
  double entered_region_at = NAN;       // first sampled t with x inside V
  double worst_fstar_step = INFINITY;   // min per-step change of F* once inside V
  std::int64_t fstar_checked_steps = 0;
  double worst_value_gap = INFINITY;       // min of dF/dt - (H(v*) - H(x)) by central differences
  double worst_B = INFINITY;            // min of B1, B2, B3 once inside V
  double max_contraction_excess = 0.0;  // max of rho(t) - rho0 e^{-t}
  std::int64_t negative_constrained = 0;
};

class FluidDomainError : public DomainError {
 public:
  FluidDomainError(const std::string& what, FluidState last) : DomainError(what), last_valid(std::move(last)) {}
  FluidState last_valid;
};

FluidTrajectory integrate(const RateRegion& region, const UtilitySpec& utility, Vec x0, Vec q0,
                          const FluidOptions& options);

struct ConvergenceReport {
  double terminal_rho_star = NAN;
  std::vector<std::pair<double, double>> rho_star_series;
  double sup_q = 0.0;
  double sup_q_first_half = 0.0;
  double sup_q_second_half = 0.0;
  double dual_feasibility = 0.0;  // most negative constrained coordinate of the terminal q
  double slackness = 0.0;         // |q(T).v*|
  double duality_gap = 0.0;       // max_k (h - q(T)).b(k) - h.v*
  bool q_bounded = false;         // no growth over the second half
  bool converged = false;
};

/// Terminal diagnostics of a trajectory against a linear-utility solution.
ConvergenceReport check_convergence(const FluidTrajectory& trajectory, const RateRegion& region,
                                    std::span<const double> h, const RateRegionSolution& solution,
                                    double tol);

struct ScaledComparison {
  double beta = 0.0;
  double sup_deviation = 0.0;
  double mean_deviation = 0.0;
};

struct ScaledOptions {
  double t_end = 20.0;
  int replicates = 8;
  int grid_points = 200;
  double fluid_h = 1e-3;
  std::uint64_t seed = 1;
};

/// Runs the stochastic engine on the mapped network for each beta, rescales
/// (X(t/beta), beta Q(t/beta)) and compares with the fluid path on a time grid.
std::vector<ScaledComparison> compare_scaled_simulation(const Scenario& s, const std::vector<double>& betas,
                                                        const ScaledOptions& options = {});

struct MappedNetwork;

struct ScenarioFluid {
  RateRegion region;
  RateRegionSolution saddle;
  Vec face_coefficients;  // empty for concave utilities
  FluidTrajectory trajectory;
  std::optional<ConvergenceReport> convergence;  // linear utilities only
};

/// Fluid path of the mapped scenario from its zero state. Fills in the saddle
/// point (and the optimal face for linear utilities) before integrating.
ScenarioFluid fluid_for_scenario(const Scenario& s, FluidOptions options = {}, double converge_tol = 0.05);

void write_trajectory_csv(std::ostream& out, const FluidTrajectory& trajectory);

}  // namespace egpd
