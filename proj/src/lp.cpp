#include "berknash/lp.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

namespace berknash {

LpInfeasibleError::LpInfeasibleError(double phase_one_objective)
    : Error(ErrorCategory::kLpInfeasible,
            "infeasible: phase-1 optimum " + std::to_string(phase_one_objective) + " > 0"),
      phase_one_objective_(phase_one_objective) {}

LpUnboundedError::LpUnboundedError(int entering_column)
    : Error(ErrorCategory::kLpUnbounded,
            "unbounded: column " + std::to_string(entering_column) + " has no blocking row"),
      entering_column_(entering_column) {}

void validate_lp(const LinearProgram& lp) {
  const auto n = lp.objective.size();
  const auto rows = lp.rhs.size();
  if (lp.constraints.rows() != rows || lp.constraints.cols() != n) {
    throw ValidationError("LP constraint matrix shape does not match objective/rhs");
  }
  if (static_cast<Eigen::Index>(lp.senses.size()) != rows) {
    throw ValidationError("LP needs one sense per row");
  }
  if (static_cast<Eigen::Index>(lp.lower_bounds.size()) != n) {
    throw ValidationError("LP needs one lower-bound entry per variable");
  }
  if (!lp.objective.allFinite() || !lp.constraints.allFinite() || !lp.rhs.allFinite()) {
    throw ValidationError("LP coefficients must be finite");
  }
  for (const auto& lb : lp.lower_bounds) {
    if (lb && !std::isfinite(*lb)) throw ValidationError("LP lower bounds must be finite");
  }
}

namespace {

constexpr double kPivotTol = 1e-11;
constexpr double kCostTol = 1e-9;
constexpr double kRatioTieTol = 1e-12;
constexpr int kMaxPivots = 200000;

// Rows 0..m-1 are constraints, row m holds reduced costs; the last column is
// the right-hand side (objective row: minus the current objective value).
class Tableau {
 public:
  Tableau(Matrix t, std::vector<int> basis) : t_(std::move(t)), basis_(std::move(basis)) {}

  int rows() const { return static_cast<int>(t_.rows()) - 1; }
  int cols() const { return static_cast<int>(t_.cols()) - 1; }
  double& at(int i, int j) { return t_(i, j); }
  double at(int i, int j) const { return t_(i, j); }
  double rhs(int i) const { return t_(i, cols()); }
  const std::vector<int>& basis() const { return basis_; }
  int pivots() const { return pivots_; }

  void set_costs(const Vector& costs) {
    const int m = rows();
    t_.row(m).setZero();
    t_.row(m).head(cols()) = costs.transpose();
    for (int i = 0; i < m; ++i) {
      const double cb = t_(m, basis_[static_cast<std::size_t>(i)]);
      if (cb != 0.0) t_.row(m) -= cb * t_.row(i);
    }
  }

  void pivot(int r, int c) {
    t_.row(r) /= t_(r, c);
    for (int i = 0; i <= rows(); ++i) {
      if (i == r) continue;
      const double f = t_(i, c);
      if (f != 0.0) {
        t_.row(i) -= f * t_.row(r);
        t_(i, c) = 0.0;
      }
    }
    t_(r, c) = 1.0;
    for (int i = 0; i < rows(); ++i) {
      if (t_(i, cols()) < 0.0 && t_(i, cols()) > -1e-13) t_(i, cols()) = 0.0;
    }
    basis_[static_cast<std::size_t>(r)] = c;
    ++pivots_;
  }

  // Bland's rule: lowest-index improving column, lowest-index leaving
  // variable among ratio ties.
  void optimize(const std::vector<bool>& allowed) {
    const int m = rows();
    while (true) {
      int enter = -1;
      for (int j = 0; j < cols(); ++j) {
        if (allowed[static_cast<std::size_t>(j)] && t_(m, j) < -kCostTol) {
          enter = j;
          break;
        }
      }
      if (enter < 0) return;
      int leave = -1;
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < basis_.size(); ++i) {
        const auto row = static_cast<Eigen::Index>(i);
        const double a = t_(row, enter);
        if (a <= kPivotTol) continue;
        const double ratio = t_(row, t_.cols() - 1) / a;
        if (leave < 0 || ratio < best - kRatioTieTol ||
            (std::abs(ratio - best) <= kRatioTieTol &&
             basis_[i] < basis_[static_cast<std::size_t>(leave)])) {
          best = ratio;
          leave = static_cast<int>(i);
        }
      }
      if (leave < 0) throw LpUnboundedError(enter);
      pivot(leave, enter);
      if (pivots_ > kMaxPivots) throw ConvergenceError("simplex exceeded pivot limit");
    }
  }

  void drop_row(int r) {
    Matrix next(t_.rows() - 1, t_.cols());
    next.topRows(r) = t_.topRows(r);
    next.bottomRows(t_.rows() - 1 - r) = t_.bottomRows(t_.rows() - 1 - r);
    t_ = std::move(next);
    basis_.erase(basis_.begin() + r);
  }

  double objective_value() const { return -t_(rows(), cols()); }

 private:
  Matrix t_;
  std::vector<int> basis_;
  int pivots_ = 0;
};

}  // namespace

LpSolution simplex_solve(const LinearProgram& lp) {
  validate_lp(lp);
  const int n = lp.num_variables();
  const int rows = lp.num_rows();
  const double sign = lp.direction == Direction::kMinimize ? 1.0 : -1.0;

  // Shift bounded variables to y >= 0; split free ones into y+ - y-.
  std::vector<int> pos_col(static_cast<std::size_t>(n));
  std::vector<int> neg_col(static_cast<std::size_t>(n), -1);
  int cols = 0;
  Vector shift = Vector::Zero(n);
  for (int j = 0; j < n; ++j) {
    pos_col[static_cast<std::size_t>(j)] = cols++;
    if (lp.lower_bounds[static_cast<std::size_t>(j)]) {
      shift(j) = *lp.lower_bounds[static_cast<std::size_t>(j)];
    } else {
      neg_col[static_cast<std::size_t>(j)] = cols++;
    }
  }

  Vector b = lp.rhs - lp.constraints * shift;
  std::vector<double> row_sign(static_cast<std::size_t>(rows), 1.0);
  std::vector<RowSense> sense = lp.senses;
  for (int i = 0; i < rows; ++i) {
    if (b(i) < 0.0) {
      row_sign[static_cast<std::size_t>(i)] = -1.0;
      if (sense[static_cast<std::size_t>(i)] == RowSense::kLessEqual) {
        sense[static_cast<std::size_t>(i)] = RowSense::kGreaterEqual;
      } else if (sense[static_cast<std::size_t>(i)] == RowSense::kGreaterEqual) {
        sense[static_cast<std::size_t>(i)] = RowSense::kLessEqual;
      }
    }
  }
  std::vector<int> slack_col(static_cast<std::size_t>(rows), -1);
  for (int i = 0; i < rows; ++i) {
    if (sense[static_cast<std::size_t>(i)] != RowSense::kEqual) {
      slack_col[static_cast<std::size_t>(i)] = cols++;
    }
  }
  const int first_artificial = cols;
  std::vector<int> art_col(static_cast<std::size_t>(rows), -1);
  for (int i = 0; i < rows; ++i) {
    if (sense[static_cast<std::size_t>(i)] != RowSense::kLessEqual) {
      art_col[static_cast<std::size_t>(i)] = cols++;
    }
  }

  Matrix t = Matrix::Zero(rows + 1, cols + 1);
  std::vector<int> basis(static_cast<std::size_t>(rows));
  for (int i = 0; i < rows; ++i) {
    const double s = row_sign[static_cast<std::size_t>(i)];
    for (int j = 0; j < n; ++j) {
      const double a = s * lp.constraints(i, j);
      t(i, pos_col[static_cast<std::size_t>(j)]) = a;
      if (neg_col[static_cast<std::size_t>(j)] >= 0) t(i, neg_col[static_cast<std::size_t>(j)]) = -a;
    }
    t(i, cols) = s * b(i);
    const auto si = static_cast<std::size_t>(i);
    if (sense[si] == RowSense::kLessEqual) {
      t(i, slack_col[si]) = 1.0;
      basis[si] = slack_col[si];
    } else {
      if (sense[si] == RowSense::kGreaterEqual) t(i, slack_col[si]) = -1.0;
      t(i, art_col[si]) = 1.0;
      basis[si] = art_col[si];
    }
  }
  Tableau tab(std::move(t), std::move(basis));

  // Phase 1: minimize the sum of artificials.
  if (first_artificial < cols) {
    Vector phase_one = Vector::Zero(cols);
    phase_one.tail(cols - first_artificial).setOnes();
    tab.set_costs(phase_one);
    tab.optimize(std::vector<bool>(static_cast<std::size_t>(cols), true));
    const double scale = std::max(1.0, b.cwiseAbs().maxCoeff());
    if (tab.objective_value() > 1e-9 * scale) throw LpInfeasibleError(tab.objective_value());

    // Drive remaining (zero-level) artificials out; rows that cannot pivot
    // are linearly redundant and are dropped.
    for (int i = tab.rows() - 1; i >= 0; --i) {
      if (tab.basis()[static_cast<std::size_t>(i)] < first_artificial) continue;
      int col = -1;
      for (int j = 0; j < first_artificial; ++j) {
        if (std::abs(tab.at(i, j)) > 1e-9) {
          col = j;
          break;
        }
      }
      if (col >= 0) {
        tab.pivot(i, col);
      } else {
        tab.drop_row(i);
      }
    }
  }

  Vector costs = Vector::Zero(cols);
  for (int j = 0; j < n; ++j) {
    const double c = sign * lp.objective(j);
    costs(pos_col[static_cast<std::size_t>(j)]) = c;
    if (neg_col[static_cast<std::size_t>(j)] >= 0) costs(neg_col[static_cast<std::size_t>(j)]) = -c;
  }
  tab.set_costs(costs);
  std::vector<bool> allowed(static_cast<std::size_t>(cols), false);
  for (int j = 0; j < first_artificial; ++j) allowed[static_cast<std::size_t>(j)] = true;
  tab.optimize(allowed);

  Vector y = Vector::Zero(cols);
  for (int i = 0; i < tab.rows(); ++i) y(tab.basis()[static_cast<std::size_t>(i)]) = tab.rhs(i);

  LpSolution sol;
  sol.x = shift;
  for (int j = 0; j < n; ++j) {
    sol.x(j) += y(pos_col[static_cast<std::size_t>(j)]);
    if (neg_col[static_cast<std::size_t>(j)] >= 0) sol.x(j) -= y(neg_col[static_cast<std::size_t>(j)]);
  }
  sol.objective = lp.objective.dot(sol.x);
  sol.pivots = tab.pivots();
  sol.min_reduced_cost = 0.0;
  for (int j = 0; j < first_artificial; ++j) {
    sol.min_reduced_cost = std::min(sol.min_reduced_cost, tab.at(tab.rows(), j));
  }

  const Vector ax = lp.constraints * sol.x;
  double residual = 0.0;
  for (int i = 0; i < rows; ++i) {
    const double gap = ax(i) - lp.rhs(i);
    switch (lp.senses[static_cast<std::size_t>(i)]) {
      case RowSense::kLessEqual: residual = std::max(residual, gap); break;
      case RowSense::kGreaterEqual: residual = std::max(residual, -gap); break;
      case RowSense::kEqual: residual = std::max(residual, std::abs(gap)); break;
    }
  }
  for (int j = 0; j < n; ++j) {
    if (lp.lower_bounds[static_cast<std::size_t>(j)]) {
      residual = std::max(residual, *lp.lower_bounds[static_cast<std::size_t>(j)] - sol.x(j));
    }
  }
  sol.max_primal_residual = residual;
  return sol;
}

void write_lp_text(std::ostream& os, const LinearProgram& lp) {
  validate_lp(lp);
  const auto flags = os.flags();
  const auto precision = os.precision(17);
  auto name = [&](int j) {
    if (static_cast<int>(lp.variable_names.size()) == lp.num_variables()) {
      return lp.variable_names[static_cast<std::size_t>(j)];
    }
    return "x" + std::to_string(j);
  };
  os << (lp.direction == Direction::kMinimize ? "minimize" : "maximize");
  for (int j = 0; j < lp.num_variables(); ++j) os << ' ' << lp.objective(j) << ' ' << name(j);
  os << '\n';
  for (int i = 0; i < lp.num_rows(); ++i) {
    os << "row " << i << ':';
    for (int j = 0; j < lp.num_variables(); ++j) {
      if (lp.constraints(i, j) != 0.0) os << ' ' << lp.constraints(i, j) << ' ' << name(j);
    }
    switch (lp.senses[static_cast<std::size_t>(i)]) {
      case RowSense::kLessEqual: os << " <= "; break;
      case RowSense::kGreaterEqual: os << " >= "; break;
      case RowSense::kEqual: os << " = "; break;
    }
    os << lp.rhs(i) << '\n';
  }
  for (int j = 0; j < lp.num_variables(); ++j) {
    const auto& lb = lp.lower_bounds[static_cast<std::size_t>(j)];
    os << "bound " << name(j) << ' ';
    if (lb) {
      os << ">= " << *lb;
    } else {
      os << "free";
    }
    os << '\n';
  }
  os.precision(precision);
  os.flags(flags);
}

}  // namespace berknash
