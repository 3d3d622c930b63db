#include "berknash/planning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "berknash/error.hpp"

namespace berknash {

Table action_backups(const SubjectiveView& view, const Vector& v) {
  const int S = view.num_states();
  const int m = view.num_actions();
  if (v.size() != S) throw ValidationError("value vector has the wrong length");
  const Vector continuation = view.kernel.rows() * v;
  Table q(S, m);
  for (int x = 0; x < S; ++x) {
    for (int a = 0; a < m; ++a) {
      q(x, a) = view.mdp.reward(x, a) + view.discount() * continuation(view.kernel.index(x, a));
    }
  }
  return q;
}

ValueFunction bellman_operator(const SubjectiveView& view, const ValueFunction& v) {
  return {action_backups(view, v.v).rowwise().maxCoeff()};
}

ValueFunction value_iteration(const SubjectiveView& view, double vi_tol) {
  if (!(vi_tol > 0.0)) throw ValidationError("vi_tol must be positive");
  const double beta = view.discount();
  const double threshold = vi_tol * (1.0 - beta) / (2.0 * beta);
  ValueFunction v{Vector::Zero(view.num_states())};
  while (true) {
    ValueFunction next = bellman_operator(view, v);
    const double step = (next.v - v.v).lpNorm<Eigen::Infinity>();
    // Rounding floor: once the step is a few ulps of |v| no iterate moves.
    const double floor =
        8.0 * std::numeric_limits<double>::epsilon() * next.v.lpNorm<Eigen::Infinity>();
    v = std::move(next);
    if (step <= threshold || step <= floor) return v;
  }
}

std::vector<std::vector<int>> greedy_sets(const SubjectiveView& view, const ValueFunction& v,
                                          double act_tol) {
  const Table q = action_backups(view, v.v);
  std::vector<std::vector<int>> sets(static_cast<std::size_t>(view.num_states()));
  for (int x = 0; x < view.num_states(); ++x) {
    const double best = q.row(x).maxCoeff();
    for (int a = 0; a < view.num_actions(); ++a) {
      if (q(x, a) >= best - act_tol) sets[static_cast<std::size_t>(x)].push_back(a);
    }
  }
  return sets;
}

Policy greedy_policy(const std::vector<std::vector<int>>& sets, int num_actions, TieRule rule) {
  Policy pi{Table::Zero(static_cast<Eigen::Index>(sets.size()), num_actions)};
  for (std::size_t x = 0; x < sets.size(); ++x) {
    const auto& set = sets[x];
    const auto row = static_cast<Eigen::Index>(x);
    if (rule == TieRule::kLowestIndex) {
      pi.probs(row, set.front()) = 1.0;
    } else {
      for (int a : set) pi.probs(row, a) = 1.0 / static_cast<double>(set.size());
    }
  }
  return pi;
}

Policy best_response_policy(const SubjectiveView& view, TieRule rule, double vi_tol,
                            double act_tol) {
  const auto v = value_iteration(view, vi_tol);
  return greedy_policy(greedy_sets(view, v, act_tol), view.num_actions(), rule);
}

LinearProgram build_primal_lp(const SubjectiveView& view) {
  const int S = view.num_states();
  const int m = view.num_actions();
  const double beta = view.discount();
  LinearProgram lp;
  lp.direction = Direction::kMinimize;
  lp.objective = Vector::Ones(S);
  lp.constraints = Matrix::Zero(S * m, S);
  lp.rhs = Vector::Zero(S * m);
  lp.senses.assign(static_cast<std::size_t>(S * m), RowSense::kGreaterEqual);
  lp.lower_bounds.assign(static_cast<std::size_t>(S), std::nullopt);
  for (int x = 0; x < S; ++x) {
    lp.variable_names.push_back("v" + std::to_string(x));
    for (int a = 0; a < m; ++a) {
      const int row = view.kernel.index(x, a);
      lp.constraints.row(row) = -beta * view.kernel.row(x, a);
      lp.constraints(row, x) += 1.0;
      lp.rhs(row) = view.mdp.reward(x, a);
    }
  }
  return lp;
}

LinearProgram build_dual_lp(const SubjectiveView& view) {
  const int S = view.num_states();
  const int m = view.num_actions();
  const double beta = view.discount();
  LinearProgram lp;
  lp.direction = Direction::kMaximize;
  lp.objective = Vector::Zero(S * m);
  lp.constraints = Matrix::Zero(S, S * m);
  lp.rhs = view.mdp.initial;
  lp.senses.assign(static_cast<std::size_t>(S), RowSense::kEqual);
  lp.lower_bounds.assign(static_cast<std::size_t>(S * m), 0.0);
  for (int x = 0; x < S; ++x) {
    for (int a = 0; a < m; ++a) {
      const int col = view.kernel.index(x, a);
      lp.variable_names.push_back("eta" + std::to_string(x) + "_" + std::to_string(a));
      lp.objective(col) = view.mdp.reward(x, a);
      lp.constraints(x, col) += 1.0;
      for (int y = 0; y < S; ++y) lp.constraints(y, col) -= beta * view.kernel(x, a, y);
    }
  }
  return lp;
}

OccupationMeasure occupation_from_solution(const SubjectiveView& view, const Vector& x) {
  const int S = view.num_states();
  const int m = view.num_actions();
  if (x.size() != S * m) throw ValidationError("occupation vector has the wrong length");
  OccupationMeasure out{Table(S, m)};
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < m; ++a) out.eta(s, a) = x(view.kernel.index(s, a));
  }
  return out;
}

Policy policy_from_occupation(const OccupationMeasure& occupation,
                              const std::optional<Policy>& fallback) {
  const auto S = occupation.eta.rows();
  const auto m = occupation.eta.cols();
  if (occupation.eta.minCoeff() < -1e-12) {
    throw ValidationError("occupation measure has negative entries");
  }
  if (fallback && (fallback->probs.rows() != S || fallback->probs.cols() != m)) {
    throw ValidationError("fallback policy shape does not match the occupation measure");
  }
  Policy pi = fallback ? *fallback : Policy::uniform(static_cast<int>(S), static_cast<int>(m));
  for (Eigen::Index x = 0; x < S; ++x) {
    const auto row = occupation.eta.row(x).cwiseMax(0.0);
    const double mass = row.sum();
    if (mass > 0.0) pi.probs.row(x) = row / mass;
  }
  return pi;
}

OccupationMeasure occupation_of_policy(const SubjectiveView& view, const Policy& pi) {
  const int S = view.num_states();
  const Matrix k_pi = induced_kernel(view.kernel, pi);
  const Matrix system = Matrix::Identity(S, S) - view.discount() * k_pi.transpose();
  const Vector h = system.partialPivLu().solve(view.mdp.initial);
  return {pi.probs.array().colwise() * h.array()};
}

double flow_residual(const SubjectiveView& view, const OccupationMeasure& occupation) {
  const int S = view.num_states();
  const int m = view.num_actions();
  Vector inflow = view.mdp.initial;
  for (int x = 0; x < S; ++x) {
    for (int a = 0; a < m; ++a) {
      inflow += view.discount() * occupation.eta(x, a) * view.kernel.row(x, a).transpose();
    }
  }
  const Vector outflow = occupation.eta.rowwise().sum();
  const double balance = (outflow - inflow).lpNorm<Eigen::Infinity>();
  return std::max(balance, std::max(0.0, -occupation.eta.minCoeff()));
}

}  // namespace berknash
