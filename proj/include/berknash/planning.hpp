#pragma once

#include <optional>
#include <vector>

#include "berknash/lp.hpp"
#include "berknash/mdp.hpp"

namespace berknash {

inline constexpr double kDefaultViTol = 1e-10;
inline constexpr double kDefaultActTol = 1e-8;

enum class TieRule {
  kLowestIndex,  // all mass on the first greedy action
  kUniform,      // spread evenly over the greedy set
};

// Discounted occupation measure eta(x, a) under a subjective kernel.
struct OccupationMeasure {
  Table eta;
};

// q(x, a) = r(x, a) + beta * sum_x' K(x'|x,a) v(x').
Table action_backups(const SubjectiveView& view, const Vector& v);

ValueFunction bellman_operator(const SubjectiveView& view, const ValueFunction& v);

// Iterates from v = 0 until the step is <= vi_tol (1 - beta) / (2 beta), so
// the result is within vi_tol of the fixed point in sup norm.
ValueFunction value_iteration(const SubjectiveView& view, double vi_tol = kDefaultViTol);

// Per state, the actions whose backup is within act_tol of the best one.
std::vector<std::vector<int>> greedy_sets(const SubjectiveView& view, const ValueFunction& v,
                                          double act_tol = kDefaultActTol);

Policy greedy_policy(const std::vector<std::vector<int>>& sets, int num_actions, TieRule rule);

Policy best_response_policy(const SubjectiveView& view, TieRule rule = TieRule::kLowestIndex,
                            double vi_tol = kDefaultViTol, double act_tol = kDefaultActTol);

// min sum_x v(x)  s.t.  v(x) - beta sum_x' Q(x'|x,a) v(x') >= r(x,a).
// Variables v(x) are free; rows are ordered (x, a) row-major.
LinearProgram build_primal_lp(const SubjectiveView& view);

// max sum r(x,a) eta(x,a)  s.t.  sum_a eta(x,a) - beta sum Q(x|x',a') eta(x',a') = mu0(x),
// eta >= 0. Variables are ordered (x, a) row-major.
LinearProgram build_dual_lp(const SubjectiveView& view);

OccupationMeasure occupation_from_solution(const SubjectiveView& view, const Vector& x);

// pi(a|x) = eta(x,a) / sum_b eta(x,b); zero-marginal states take the
// fallback row (uniform when no fallback is given).
Policy policy_from_occupation(const OccupationMeasure& occupation,
                              const std::optional<Policy>& fallback = std::nullopt);

// Solves h = mu0 + beta K_pi^T h and sets eta(x,a) = pi(a|x) h(x).
OccupationMeasure occupation_of_policy(const SubjectiveView& view, const Policy& pi);

// Largest violation of the dual-LP flow constraints and nonnegativity.
double flow_residual(const SubjectiveView& view, const OccupationMeasure& occupation);

}  // namespace berknash
