#include "berknash/mdp.hpp"

#include <cmath>
#include <sstream>

#include "berknash/error.hpp"

namespace berknash {

Kernel::Kernel(int num_states, int num_actions)
    : num_states_(num_states),
      num_actions_(num_actions),
      rows_(Table::Zero(num_states * num_actions, num_states)) {}

Kernel::Kernel(int num_states, int num_actions, Table rows)
    : num_states_(num_states), num_actions_(num_actions), rows_(std::move(rows)) {
  if (rows_.rows() != num_states * num_actions || rows_.cols() != num_states) {
    throw ValidationError("kernel table has shape " + std::to_string(rows_.rows()) + "x" +
                          std::to_string(rows_.cols()) + ", expected " +
                          std::to_string(num_states * num_actions) + "x" +
                          std::to_string(num_states));
  }
}

Policy Policy::uniform(int num_states, int num_actions) {
  return {Table::Constant(num_states, num_actions, 1.0 / num_actions)};
}

Policy Policy::deterministic(const std::vector<int>& actions, int num_actions) {
  Policy pi{Table::Zero(static_cast<Eigen::Index>(actions.size()), num_actions)};
  for (std::size_t x = 0; x < actions.size(); ++x) {
    pi.probs(static_cast<Eigen::Index>(x), actions[x]) = 1.0;
  }
  return pi;
}

namespace {

void check_probability_vector(const Eigen::Ref<const Eigen::RowVectorXd>& row,
                              const std::string& where) {
  double sum = 0.0;
  for (Eigen::Index j = 0; j < row.size(); ++j) {
    if (!std::isfinite(row(j)) || row(j) < 0.0) {
      std::ostringstream os;
      os << where << ": entry " << j << " = " << row(j) << " is not a probability";
      throw ValidationError(os.str());
    }
    sum += row(j);
  }
  if (std::abs(sum - 1.0) > kStochasticTol) {
    std::ostringstream os;
    os.precision(17);
    os << where << ": row sums to " << sum << ", expected 1";
    throw ValidationError(os.str());
  }
}

}  // namespace

void validate_kernel(const Kernel& kernel, const std::string& name) {
  if (kernel.num_states() <= 0 || kernel.num_actions() <= 0) {
    throw ValidationError(name + ": state and action counts must be positive");
  }
  for (int x = 0; x < kernel.num_states(); ++x) {
    for (int a = 0; a < kernel.num_actions(); ++a) {
      check_probability_vector(kernel.row(x, a), name + " row (x=" + std::to_string(x) +
                                                      ", a=" + std::to_string(a) + ")");
    }
  }
}

void validate_instance(const MdpInstance& mdp) {
  validate_kernel(mdp.transition, "transition");
  const int S = mdp.num_states();
  const int m = mdp.num_actions();
  if (!(mdp.discount > 0.0 && mdp.discount < 1.0)) {
    throw ValidationError("discount out of range: " + std::to_string(mdp.discount) +
                          " not in (0, 1)");
  }
  if (mdp.reward.rows() != S || mdp.reward.cols() != m) {
    throw ValidationError("reward table must be " + std::to_string(S) + "x" + std::to_string(m));
  }
  for (int x = 0; x < S; ++x) {
    for (int a = 0; a < m; ++a) {
      if (!std::isfinite(mdp.reward(x, a))) {
        throw ValidationError("reward (x=" + std::to_string(x) + ", a=" + std::to_string(a) +
                              ") is not finite");
      }
    }
  }
  if (mdp.initial.size() != S) {
    throw ValidationError("initial distribution must have " + std::to_string(S) + " entries");
  }
  check_probability_vector(mdp.initial.transpose(), "initial distribution");
}

void validate_policy(const Policy& pi, int num_states, int num_actions) {
  if (pi.num_states() != num_states || pi.num_actions() != num_actions) {
    throw ValidationError("policy has shape " + std::to_string(pi.num_states()) + "x" +
                          std::to_string(pi.num_actions()) + ", expected " +
                          std::to_string(num_states) + "x" + std::to_string(num_actions));
  }
  for (int x = 0; x < num_states; ++x) {
    check_probability_vector(pi.probs.row(x), "policy row x=" + std::to_string(x));
  }
}

Matrix induced_kernel(const Kernel& kernel, const Policy& pi) {
  validate_policy(pi, kernel.num_states(), kernel.num_actions());
  const int S = kernel.num_states();
  Matrix out = Matrix::Zero(S, S);
  for (int x = 0; x < S; ++x) {
    for (int a = 0; a < kernel.num_actions(); ++a) {
      out.row(x) += pi.probs(x, a) * kernel.row(x, a);
    }
  }
  return out;
}

Matrix induced_kernel(const MdpInstance& mdp, const Policy& pi) {
  return induced_kernel(mdp.transition, pi);
}

Vector policy_reward(const Table& reward, const Policy& pi) {
  return reward.cwiseProduct(pi.probs).rowwise().sum();
}

namespace {

std::vector<bool> reachable_from(const Matrix& chain, int start, bool reverse) {
  const auto n = chain.rows();
  std::vector<bool> seen(static_cast<std::size_t>(n), false);
  std::vector<int> stack{start};
  seen[static_cast<std::size_t>(start)] = true;
  while (!stack.empty()) {
    const int u = stack.back();
    stack.pop_back();
    for (int w = 0; w < n; ++w) {
      const double p = reverse ? chain(w, u) : chain(u, w);
      if (p > kSupportZero && !seen[static_cast<std::size_t>(w)]) {
        seen[static_cast<std::size_t>(w)] = true;
        stack.push_back(w);
      }
    }
  }
  return seen;
}

}  // namespace

void check_irreducible(const Matrix& chain) {
  // Strongly connected iff everything reaches 0 and 0 reaches everything.
  const auto forward = reachable_from(chain, 0, false);
  for (std::size_t w = 0; w < forward.size(); ++w) {
    if (!forward[w]) throw ReducibleChainError(0, static_cast<int>(w));
  }
  const auto backward = reachable_from(chain, 0, true);
  for (std::size_t w = 0; w < backward.size(); ++w) {
    if (!backward[w]) throw ReducibleChainError(static_cast<int>(w), 0);
  }
}

StationaryDistribution stationary_distribution(const Matrix& chain) {
  const auto n = chain.rows();
  if (chain.cols() != n || n == 0) throw ValidationError("chain must be a nonempty square matrix");
  for (Eigen::Index x = 0; x < n; ++x) {
    check_probability_vector(chain.row(x), "chain row x=" + std::to_string(x));
  }
  check_irreducible(chain);

  Matrix system = chain.transpose() - Matrix::Identity(n, n);
  system.row(n - 1).setOnes();
  Vector rhs = Vector::Zero(n);
  rhs(n - 1) = 1.0;
  Vector mu = system.fullPivLu().solve(rhs);
  mu = mu.cwiseMax(0.0);
  mu /= mu.sum();

  const double residual = (mu.transpose() * chain - mu.transpose()).lpNorm<1>();
  if (residual > 1e-10) {
    throw ConvergenceError("stationary solve residual " + std::to_string(residual) +
                           " exceeds 1e-10");
  }
  return {mu};
}

StateActionFrequency state_action_frequencies(const MdpInstance& mdp, const Policy& pi) {
  const auto mu = stationary_distribution(induced_kernel(mdp, pi)).mu;
  return {pi.probs.array().colwise() * mu.array()};
}

Policy policy_from_frequencies(const StateActionFrequency& freq) {
  const auto S = freq.d.rows();
  const auto m = freq.d.cols();
  Policy pi{Table::Constant(S, m, 1.0 / static_cast<double>(m))};
  for (Eigen::Index x = 0; x < S; ++x) {
    const double mass = freq.d.row(x).sum();
    if (mass > 0.0) pi.probs.row(x) = freq.d.row(x) / mass;
  }
  return pi;
}

ValueFunction policy_value(const MdpInstance& mdp, const Kernel& kernel, const Policy& pi) {
  if (kernel.num_states() != mdp.num_states() || kernel.num_actions() != mdp.num_actions()) {
    throw ValidationError("kernel dimensions do not match the instance");
  }
  const auto S = mdp.num_states();
  const Matrix k_pi = induced_kernel(kernel, pi);
  const Vector r_pi = policy_reward(mdp.reward, pi);
  const Matrix system = Matrix::Identity(S, S) - mdp.discount * k_pi;
  return {system.partialPivLu().solve(r_pi)};
}

}  // namespace berknash
