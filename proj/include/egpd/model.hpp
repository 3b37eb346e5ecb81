#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "egpd/lp.hpp"
#include "egpd/rng.hpp"

namespace egpd {

double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> a);

/// Raised when a utility is evaluated outside its domain or yields a
/// non-finite gradient.
class DomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Random per-slot arrival vector.
///
/// `independent-poisson` draws each coordinate from Poisson(rate_i);
/// `batch-table` draws one whole batch vector from a finite table;
/// `deterministic` always returns the same vector; `linear` maps another
/// model through a fixed matrix (used for embeddings and coordinate changes).
class ArrivalModel {
 public:
  enum class Kind { IndependentPoisson, BatchTable, Deterministic, Linear };

  struct Batch {
    Vec items;
    double probability = 0.0;
  };

  ArrivalModel() = default;

  static ArrivalModel independent_poisson(Vec rates);
  static ArrivalModel batch_table(std::vector<Batch> batches);
  static ArrivalModel deterministic(Vec items);
  static ArrivalModel linear(ArrivalModel base, Matrix rows);
  static ArrivalModel zero(std::size_t dimension) { return deterministic(Vec(dimension, 0.0)); }

  Kind kind() const { return kind_; }
  std::string kind_name() const;
  std::size_t dimension() const { return mean_.size(); }
  const Vec& mean() const { return mean_; }

  /// Poisson rates or the deterministic vector.
  const Vec& parameters() const { return params_; }
  const std::vector<Batch>& batches() const { return batches_; }
  const ArrivalModel* base() const { return base_.get(); }
  const Matrix& map() const { return map_; }

  void sample(Rng& rng, std::span<double> out) const;
  Vec sample(Rng& rng) const;

  /// Vectors spanning the support of (sample - mean).
  std::vector<Vec> variation_directions() const;

  /// Largest absolute coordinate over the support; nullopt when unbounded.
  std::optional<double> bound() const;

  /// Invariant violations, empty when the model is well formed.
  std::vector<std::string> problems() const;

 private:
  Kind kind_ = Kind::Deterministic;
  Vec params_;
  std::vector<Batch> batches_;
  Vec cdf_;
  std::shared_ptr<const ArrivalModel> base_;
  Matrix map_;
  Vec mean_;
};

/// Concave utility with gradient. The two linear kinds expose their
/// coefficients so the LP oracle can use them directly.
class UtilitySpec {
 public:
  enum class Kind { LinearSum, WeightedLinear, Concave };
  using ValueFn = std::function<double(std::span<const double>)>;
  using GradientFn = std::function<Vec(std::span<const double>)>;
  using DomainFn = std::function<bool(std::span<const double>)>;

  static UtilitySpec linear_sum();
  static UtilitySpec weighted_linear(Vec coefficients, double constant = 0.0);
  static UtilitySpec concave(std::string name, ValueFn value, GradientFn gradient,
                             DomainFn domain = {});

  /// sum_j a_j x_j - 1/2 sum_j k_j (x_j - c_j)^2, defined everywhere.
  static UtilitySpec quadratic(Vec linear, Vec curvature, Vec center);
  /// sum_j a_j log(x_j + s_j), defined for x_j > -s_j.
  static UtilitySpec log_sum(Vec weights, Vec shift);

  Kind kind() const { return kind_; }
  bool is_linear() const { return kind_ != Kind::Concave; }
  const std::string& name() const { return name_; }
  const std::map<std::string, Vec>& parameters() const { return params_; }

  double value(std::span<const double> x) const;
  Vec gradient(std::span<const double> x) const;
  bool in_domain(std::span<const double> x) const;

  /// Gradient of a linear utility in `dimension` coordinates.
  Vec linear_coefficients(std::size_t dimension) const;
  double constant() const { return constant_; }

  /// H(v) = G(v[offset .. offset+width) + shift) on a `total`-dimensional space.
  UtilitySpec embedded(std::size_t total, std::size_t offset, std::size_t width,
                       double shift) const;

 private:
  Kind kind_ = Kind::LinearSum;
  std::string name_ = "linear-sum";
  Vec coefficients_;
  double constant_ = 0.0;
  ValueFn value_;
  GradientFn gradient_;
  DomainFn domain_;
  std::map<std::string, Vec> params_;
};

/// Finite-difference gradient audit at `points` random points of the box
/// [lo, hi] intersected with the domain. Returns a message on disagreement.
std::optional<std::string> audit_gradient(const UtilitySpec& utility, std::span<const double> lo,
                                          std::span<const double> hi, std::uint64_t seed,
                                          int points = 10, double rel_tol = 1e-4);

struct MatchingSpec {
  std::string label;
  Vec mu;  // items removed per activation; any sign
  double reward = 0.0;
};

enum class CompletionPolicy { Fcfs, CostPriority };

std::string to_string(CompletionPolicy policy);

/// Restart: the completion scan repeats until nothing pending is completable,
/// and also runs once the slot's arrivals are in. Single: one completion per round.
enum class CompletionScan { Restart, Single };

std::string to_string(CompletionScan scan);

struct RateChange {
  std::int64_t slot = 0;
  ArrivalModel arrivals;
};

/// A complete matching-system run description. Matching 0 is the empty matching.
struct Scenario {
  std::string name = "scenario";
  std::vector<std::string> items;
  std::vector<MatchingSpec> matchings;
  ArrivalModel arrivals;
  int m = 1;
  double beta = 0.01;
  Vec gamma;
  UtilitySpec utility = UtilitySpec::linear_sum();
  Vec holding_costs;
  CompletionPolicy completion_policy = CompletionPolicy::Fcfs;
  CompletionScan completion_scan = CompletionScan::Restart;
  std::int64_t horizon = 1000;
  std::uint64_t seed = 1;
  std::vector<RateChange> rate_changes;

  std::size_t num_items() const { return items.size(); }
  std::size_t num_matchings() const { return matchings.size(); }
  /// max_j sum_i mu_i(j)
  double mu_star() const;
  Vec rewards() const;
};

struct Diagnostic {
  std::string field;
  std::string message;
};

/// Empty iff every scenario invariant holds.
std::vector<Diagnostic> validate_scenario(const Scenario& s);

struct Control {
  std::string label;
  Vec mu;                // deterministic removal, >= 0 on constrained nodes
  ArrivalModel arrivals; // lambda(k), nonnegative on constrained nodes
};

/// General constrained/free queue network. Nodes [0, n_constrained) are
/// constrained (queues stay nonnegative), the remaining n_free are free.
///
/// One time step is one control decision. With rounds_per_slot = r > 1,
/// arrivals are drawn only on every r-th step (the last decision of a slot),
/// which is how an m-decisions-per-slot matching system maps onto the model.
class NetworkModel {
 public:
  NetworkModel(std::size_t n_constrained, std::size_t n_free, std::vector<Control> controls,
               int rounds_per_slot = 1);

  std::size_t n_constrained() const { return n_constrained_; }
  std::size_t n_free() const { return n_free_; }
  std::size_t dimension() const { return n_constrained_ + n_free_; }
  std::size_t num_controls() const { return controls_.size(); }
  int rounds_per_slot() const { return rounds_per_slot_; }
  const std::vector<Control>& controls() const { return controls_; }
  const Control& control(std::size_t k) const { return controls_.at(k); }

  /// E[lambda(k)] / rounds_per_slot - mu(k)
  const Vec& mean_increment(std::size_t k) const { return mean_increments_.at(k); }
  const std::vector<Vec>& mean_increments() const { return mean_increments_; }

  /// Declared bound B on arrival samples (infinity for unbounded laws).
  double arrival_bound() const;
  double max_removal() const;

  std::vector<std::string> problems() const;

 private:
  std::size_t n_constrained_;
  std::size_t n_free_;
  std::vector<Control> controls_;
  int rounds_per_slot_;
  std::vector<Vec> mean_increments_;
};

struct DriftConditionReport {
  bool holds = false;
  double margin = 0.0;                           // min over subsets of delta*
  std::uint64_t worst_subset = 0;                // bitmask over free nodes
  std::map<std::uint64_t, Vec> witnesses;        // subset -> maximizing mixture
  std::map<std::uint64_t, double> subset_margins;
};

/// Exhaustive drift-sign check: for each subset S of free nodes, the best
/// mixture margin delta with drift >= delta on S and <= -delta elsewhere.
/// Throws std::invalid_argument above 20 free nodes.
DriftConditionReport check_drift_condition(const NetworkModel& net, double epsilon);

struct SubspaceReduction {
  Matrix basis;  // orthonormal rows over the free coordinates
  NetworkModel reduced;
  bool full_rank = false;

  std::size_t dimension() const { return basis.size(); }
};

/// Re-expresses the free coordinates in an orthonormal basis of the span of
/// all realizable queue increments, removing linear identities between queues.
SubspaceReduction reduce_drift_subspace(const NetworkModel& net, double tol = 1e-9);

struct NcondReport {
  bool stabilizable = false;
  std::optional<std::vector<std::size_t>> violating_subset;  // top indices
};

/// Bipartite stabilizability: alpha_T < alpha_B(T) for every strict nonempty
/// subset T of top items. edges are (top, bottom) index pairs.
NcondReport check_ncond(std::span<const double> top_rates, std::span<const double> bottom_rates,
                        const std::vector<std::pair<std::size_t, std::size_t>>& edges);

}  // namespace egpd
