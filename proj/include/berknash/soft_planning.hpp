#pragma once

#include "berknash/mdp.hpp"

namespace berknash {

struct SoftPlanConfig {
  double temperature = 0.1;
  double fp_tol = 1e-10;
  long max_iters = 1'000'000;
};

void validate_soft_config(const SoftPlanConfig& cfg);

// Soft action values Q_{theta,lambda}(x, a) = r + beta sum Q_theta v.
struct SoftQTable {
  Table q;
};

struct SoftSolution {
  ValueFunction value;
  SoftQTable q;
};

struct SoftBestResponse {
  Policy policy;
  ValueFunction value;
  SoftQTable q;
};

// (T v)(x) = lambda log sum_a exp(q(x, a) / lambda), evaluated max-shifted.
ValueFunction soft_bellman_operator(const SubjectiveView& view, double temperature,
                                    const ValueFunction& v);

// Iterates from v = 0 until the step is <= fp_tol (1 - beta) / (2 beta).
// Throws ConvergenceError after max_iters.
SoftSolution soft_value_iteration(const SubjectiveView& view, const SoftPlanConfig& cfg);

// Rowwise softmax of q / lambda.
Policy softmax_policy(const SoftQTable& q, double temperature);

SoftBestResponse soft_best_response(const SubjectiveView& view, const SoftPlanConfig& cfg);

}  // namespace berknash
