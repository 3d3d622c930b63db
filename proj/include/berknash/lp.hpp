#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "berknash/error.hpp"
#include "berknash/linalg.hpp"

namespace berknash {

enum class RowSense { kLessEqual, kGreaterEqual, kEqual };
enum class Direction { kMinimize, kMaximize };

struct LinearProgram {
  Direction direction = Direction::kMinimize;
  Vector objective;
  Matrix constraints;
  Vector rhs;
  std::vector<RowSense> senses;
  // nullopt marks a free variable.
  std::vector<std::optional<double>> lower_bounds;
  std::vector<std::string> variable_names;  // optional; used by write_lp_text

  int num_variables() const { return static_cast<int>(objective.size()); }
  int num_rows() const { return static_cast<int>(rhs.size()); }
};

struct LpSolution {
  Vector x;
  double objective = 0.0;
  int pivots = 0;
  // Largest constraint/bound violation of x against the original program.
  double max_primal_residual = 0.0;
  // Smallest phase-2 reduced cost at termination (minimization form).
  double min_reduced_cost = 0.0;
};

class LpInfeasibleError : public Error {
 public:
  explicit LpInfeasibleError(double phase_one_objective);
  // Optimal sum of artificial variables; positive proves infeasibility.
  double phase_one_objective() const { return phase_one_objective_; }

 private:
  double phase_one_objective_;
};

class LpUnboundedError : public Error {
 public:
  explicit LpUnboundedError(int entering_column);
  // Standard-form column whose increase improves the objective without bound.
  int entering_column() const { return entering_column_; }

 private:
  int entering_column_;
};

void validate_lp(const LinearProgram& lp);

// Dense two-phase tableau simplex with Bland's rule.
LpSolution simplex_solve(const LinearProgram& lp);

// Canonical plain-text dump: direction/objective line, one line per row,
// then bounds.
void write_lp_text(std::ostream& os, const LinearProgram& lp);

}  // namespace berknash
