#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace egpd {

using Vec = std::vector<double>;
using Matrix = std::vector<Vec>;

enum class RowSense { LessEqual, GreaterEqual, Equal };

/// maximize objective·x  s.t.  rows[i]·x (sense) rhs[i],  x >= 0 except free vars.
struct LinearProgram {
  Vec objective;
  Matrix rows;
  std::vector<RowSense> senses;
  Vec rhs;
  std::vector<bool> free_variables;  // empty: all variables nonnegative

  explicit LinearProgram(Vec objective_coeffs) : objective(std::move(objective_coeffs)) {}

  std::size_t num_variables() const { return objective.size(); }
  std::size_t num_rows() const { return rows.size(); }

  void add_row(Vec coeffs, RowSense sense, double value);
};

enum class LpStatus { Optimal, Infeasible, Unbounded, IterationLimit };

std::string to_string(LpStatus status);

struct LpSolution {
  LpStatus status = LpStatus::Infeasible;
  double value = 0.0;
  Vec x;
  /// One multiplier per row: >= 0 for <= rows, <= 0 for >= rows, free for
  /// equality rows. Satisfies rhs·duals == value at optimality.
  Vec duals;
  int pivots = 0;
};

struct SimplexOptions {
  double pivot_tolerance = 1e-10;
  double optimality_tolerance = 1e-10;
  int max_pivots = 100000;
};

/// Two-phase dense primal simplex. Entering and leaving variables follow
/// Bland's smallest-index rule, so degenerate problems terminate.
LpSolution solve_lp(const LinearProgram& lp, const SimplexOptions& options = {});

}  // namespace egpd
