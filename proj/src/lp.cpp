#include "egpd/lp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace egpd {

void LinearProgram::add_row(Vec coeffs, RowSense sense, double value) {
  if (coeffs.size() != objective.size()) {
    throw std::invalid_argument("LP row has " + std::to_string(coeffs.size()) +
                                " coefficients, expected " +
                                std::to_string(objective.size()));
  }
  rows.push_back(std::move(coeffs));
  senses.push_back(sense);
  rhs.push_back(value);
}

std::string to_string(LpStatus status) {
  switch (status) {
    case LpStatus::Optimal: return "optimal";
    case LpStatus::Infeasible: return "infeasible";
    case LpStatus::Unbounded: return "unbounded";
    case LpStatus::IterationLimit: return "iteration-limit";
  }
  return "unknown";
}

namespace {

class Tableau {
 public:
  Tableau(std::size_t rows, std::size_t cols)
      : m_(rows), n_(cols), a_(rows * cols, 0.0), b_(rows, 0.0), d_(cols, 0.0), basis_(rows, 0) {}

  double& at(std::size_t i, std::size_t j) { return a_[i * n_ + j]; }
  double at(std::size_t i, std::size_t j) const { return a_[i * n_ + j]; }
  double& rhs(std::size_t i) { return b_[i]; }
  double rhs(std::size_t i) const { return b_[i]; }
  std::size_t basic(std::size_t i) const { return basis_[i]; }
  void set_basic(std::size_t i, std::size_t j) { basis_[i] = j; }
  double reduced_cost(std::size_t j) const { return d_[j]; }
  std::size_t rows() const { return m_; }
  std::size_t cols() const { return n_; }

  void price(const Vec& costs) {
    for (std::size_t j = 0; j < n_; ++j) {
      double z = 0.0;
      for (std::size_t i = 0; i < m_; ++i) z += costs[basis_[i]] * at(i, j);
      d_[j] = costs[j] - z;
    }
  }

  void pivot(std::size_t r, std::size_t s) {
    const double piv = at(r, s);
    for (std::size_t j = 0; j < n_; ++j) at(r, j) /= piv;
    b_[r] /= piv;
    at(r, s) = 1.0;
    for (std::size_t i = 0; i < m_; ++i) {
      if (i == r) continue;
      const double f = at(i, s);
      if (f == 0.0) continue;
      for (std::size_t j = 0; j < n_; ++j) at(i, j) -= f * at(r, j);
      at(i, s) = 0.0;
      b_[i] -= f * b_[r];
      if (std::fabs(b_[i]) < 1e-13) b_[i] = std::max(b_[i], 0.0);
    }
    const double f = d_[s];
    if (f != 0.0) {
      for (std::size_t j = 0; j < n_; ++j) d_[j] -= f * at(r, j);
      d_[s] = 0.0;
    }
    basis_[r] = s;
  }

 private:
  std::size_t m_, n_;
  std::vector<double> a_;
  Vec b_;
  Vec d_;
  std::vector<std::size_t> basis_;
};

enum class PhaseResult { Optimal, Unbounded, IterationLimit };

PhaseResult run_phase(Tableau& t, const std::vector<bool>& may_enter, const SimplexOptions& opt,
                      int& pivots) {
  while (true) {
    std::size_t entering = t.cols();
    for (std::size_t j = 0; j < t.cols(); ++j) {
      if (may_enter[j] && t.reduced_cost(j) > opt.optimality_tolerance) {
        entering = j;
        break;
      }
    }
    if (entering == t.cols()) return PhaseResult::Optimal;

    std::size_t leaving = t.rows();
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < t.rows(); ++i) {
      const double coef = t.at(i, entering);
      if (coef <= opt.pivot_tolerance) continue;
      const double ratio = std::max(t.rhs(i), 0.0) / coef;
      const double tie = 1e-12 * (1.0 + std::fabs(best));
      if (leaving == t.rows() || ratio < best - tie) {
        best = ratio;
        leaving = i;
      } else if (std::fabs(ratio - best) <= tie && t.basic(i) < t.basic(leaving)) {
        leaving = i;
      }
    }
    if (leaving == t.rows()) return PhaseResult::Unbounded;
    if (++pivots > opt.max_pivots) return PhaseResult::IterationLimit;
    t.pivot(leaving, entering);
  }
}

}  // namespace

LpSolution solve_lp(const LinearProgram& lp, const SimplexOptions& options) {
  const std::size_t n_vars = lp.num_variables();
  const std::size_t m = lp.num_rows();
  if (lp.senses.size() != m || lp.rhs.size() != m) {
    throw std::invalid_argument("LP rows, senses and rhs must have equal length");
  }
  if (!lp.free_variables.empty() && lp.free_variables.size() != n_vars) {
    throw std::invalid_argument("free_variables must be empty or cover every variable");
  }

  // Structural columns: free variables are split into a positive and a negative part.
  std::vector<std::size_t> pos_col(n_vars), neg_col(n_vars, SIZE_MAX);
  std::size_t n_struct = 0;
  for (std::size_t j = 0; j < n_vars; ++j) {
    pos_col[j] = n_struct++;
    if (!lp.free_variables.empty() && lp.free_variables[j]) neg_col[j] = n_struct++;
  }

  // Normalize to nonnegative right-hand sides.
  std::vector<double> sign(m, 1.0);
  std::vector<RowSense> sense(lp.senses);
  for (std::size_t i = 0; i < m; ++i) {
    if (lp.rhs[i] < 0.0) {
      sign[i] = -1.0;
      if (sense[i] == RowSense::LessEqual) sense[i] = RowSense::GreaterEqual;
      else if (sense[i] == RowSense::GreaterEqual) sense[i] = RowSense::LessEqual;
    }
  }

  std::size_t n_slack = 0, n_art = 0;
  for (auto s : sense) {
    if (s != RowSense::Equal) ++n_slack;
    if (s != RowSense::LessEqual) ++n_art;
  }
  const std::size_t n_cols = n_struct + n_slack + n_art;
  const std::size_t first_art = n_struct + n_slack;

  Tableau t(m, n_cols);
  std::vector<std::size_t> identity_col(m);
  std::size_t next_slack = n_struct, next_art = first_art;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n_vars; ++j) {
      const double c = sign[i] * lp.rows[i][j];
      t.at(i, pos_col[j]) = c;
      if (neg_col[j] != SIZE_MAX) t.at(i, neg_col[j]) = -c;
    }
    t.rhs(i) = sign[i] * lp.rhs[i];
    if (sense[i] == RowSense::LessEqual) {
      t.at(i, next_slack) = 1.0;
      identity_col[i] = next_slack++;
    } else {
      if (sense[i] == RowSense::GreaterEqual) t.at(i, next_slack++) = -1.0;
      t.at(i, next_art) = 1.0;
      identity_col[i] = next_art++;
    }
    t.set_basic(i, identity_col[i]);
  }

  LpSolution out;
  int pivots = 0;

  // Phase 1: drive artificial variables to zero.
  if (n_art > 0) {
    Vec phase1(n_cols, 0.0);
    for (std::size_t j = first_art; j < n_cols; ++j) phase1[j] = -1.0;
    t.price(phase1);
    std::vector<bool> may_enter(n_cols, true);
    const auto result = run_phase(t, may_enter, options, pivots);
    if (result == PhaseResult::IterationLimit) {
      out.status = LpStatus::IterationLimit;
      out.pivots = pivots;
      return out;
    }
    double infeasibility = 0.0, scale = 1.0;
    for (std::size_t i = 0; i < m; ++i) {
      if (t.basic(i) >= first_art) infeasibility += t.rhs(i);
      scale = std::max(scale, std::fabs(lp.rhs[i]));
    }
    if (infeasibility > 1e-9 * scale) {
      out.status = LpStatus::Infeasible;
      out.pivots = pivots;
      return out;
    }
    // Pivot remaining zero-level artificials out of the basis where possible;
    // rows where that is impossible are linearly redundant and stay inert.
    for (std::size_t i = 0; i < m; ++i) {
      if (t.basic(i) < first_art) continue;
      t.rhs(i) = 0.0;
      for (std::size_t j = 0; j < first_art; ++j) {
        if (std::fabs(t.at(i, j)) > options.pivot_tolerance) {
          t.pivot(i, j);
          ++pivots;
          break;
        }
      }
    }
  }

  // Phase 2.
  Vec costs(n_cols, 0.0);
  for (std::size_t j = 0; j < n_vars; ++j) {
    costs[pos_col[j]] = lp.objective[j];
    if (neg_col[j] != SIZE_MAX) costs[neg_col[j]] = -lp.objective[j];
  }
  t.price(costs);
  std::vector<bool> may_enter(n_cols, true);
  for (std::size_t j = first_art; j < n_cols; ++j) may_enter[j] = false;
  const auto result = run_phase(t, may_enter, options, pivots);
  out.pivots = pivots;
  if (result == PhaseResult::Unbounded) {
    out.status = LpStatus::Unbounded;
    return out;
  }
  if (result == PhaseResult::IterationLimit) {
    out.status = LpStatus::IterationLimit;
    return out;
  }

  Vec column_values(n_cols, 0.0);
  for (std::size_t i = 0; i < m; ++i) column_values[t.basic(i)] = std::max(t.rhs(i), 0.0);
  out.x.assign(n_vars, 0.0);
  for (std::size_t j = 0; j < n_vars; ++j) {
    out.x[j] = column_values[pos_col[j]];
    if (neg_col[j] != SIZE_MAX) out.x[j] -= column_values[neg_col[j]];
  }
  out.value = 0.0;
  for (std::size_t j = 0; j < n_vars; ++j) out.value += lp.objective[j] * out.x[j];

  // The identity column of row i has zero cost, so its reduced cost is -y_i.
  out.duals.assign(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    out.duals[i] = -sign[i] * t.reduced_cost(identity_col[i]);
  }
  out.status = LpStatus::Optimal;
  return out;
}

}  // namespace egpd
