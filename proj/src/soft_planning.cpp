#include "berknash/soft_planning.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "berknash/error.hpp"
#include "berknash/planning.hpp"

namespace berknash {

void validate_soft_config(const SoftPlanConfig& cfg) {
  if (!(cfg.temperature > 0.0) || !std::isfinite(cfg.temperature)) {
    throw ValidationError("temperature must be positive and finite");
  }
  if (!(cfg.fp_tol > 0.0)) throw ValidationError("fp_tol must be positive");
  if (cfg.max_iters <= 0) throw ValidationError("max_iters must be positive");
}

namespace {

Vector log_sum_exp_rows(const Table& q, double temperature) {
  const Vector top = q.rowwise().maxCoeff();
  Vector out(q.rows());
  for (Eigen::Index x = 0; x < q.rows(); ++x) {
    const double sum = ((q.row(x).array() - top(x)) / temperature).exp().sum();
    out(x) = top(x) + temperature * std::log(sum);
  }
  return out;
}

}  // namespace

ValueFunction soft_bellman_operator(const SubjectiveView& view, double temperature,
                                    const ValueFunction& v) {
  if (!(temperature > 0.0)) throw ValidationError("temperature must be positive");
  return {log_sum_exp_rows(action_backups(view, v.v), temperature)};
}

SoftSolution soft_value_iteration(const SubjectiveView& view, const SoftPlanConfig& cfg) {
  validate_soft_config(cfg);
  const double beta = view.discount();
  const double threshold = cfg.fp_tol * (1.0 - beta) / (2.0 * beta);
  ValueFunction v{Vector::Zero(view.num_states())};
  for (long iter = 0; iter < cfg.max_iters; ++iter) {
    ValueFunction next = soft_bellman_operator(view, cfg.temperature, v);
    const double step = (next.v - v.v).lpNorm<Eigen::Infinity>();
    v = std::move(next);
    if (step <= threshold) return {v, {action_backups(view, v.v)}};
  }
  throw ConvergenceError("soft value iteration did not reach fp_tol=" +
                         std::to_string(cfg.fp_tol) + " within " +
                         std::to_string(cfg.max_iters) + " iterations");
}

Policy softmax_policy(const SoftQTable& q, double temperature) {
  if (!(temperature > 0.0)) throw ValidationError("temperature must be positive");
  Policy pi{Table(q.q.rows(), q.q.cols())};
  for (Eigen::Index x = 0; x < q.q.rows(); ++x) {
    const double top = q.q.row(x).maxCoeff();
    // Floor at the smallest normal double so rows stay strictly positive
    // when a logit gap underflows exp().
    pi.probs.row(x) = ((q.q.row(x).array() - top) / temperature)
                          .exp()
                          .max(std::numeric_limits<double>::min())
                          .matrix();
    pi.probs.row(x) /= pi.probs.row(x).sum();
  }
  return pi;
}

SoftBestResponse soft_best_response(const SubjectiveView& view, const SoftPlanConfig& cfg) {
  auto solution = soft_value_iteration(view, cfg);
  Policy pi = softmax_policy(solution.q, cfg.temperature);
  return {std::move(pi), std::move(solution.value), std::move(solution.q)};
}

}  // namespace berknash
