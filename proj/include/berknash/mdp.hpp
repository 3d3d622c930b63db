#pragma once

#include <string>
#include <vector>

#include "berknash/linalg.hpp"

namespace berknash {

inline constexpr double kStochasticTol = 1e-12;
// Support-graph entries at or below this are treated as structural zeros.
inline constexpr double kSupportZero = 1e-15;

// Transition tensor K(x'|x,a), stored dense with one row per (x, a) pair in
// row-major (x, a, x') order.
class Kernel {
 public:
  Kernel() = default;
  Kernel(int num_states, int num_actions);
  Kernel(int num_states, int num_actions, Table rows);

  int num_states() const { return num_states_; }
  int num_actions() const { return num_actions_; }

  double operator()(int x, int a, int next) const { return rows_(index(x, a), next); }
  double& operator()(int x, int a, int next) { return rows_(index(x, a), next); }

  Table::ConstRowXpr row(int x, int a) const { return rows_.row(index(x, a)); }
  Table::RowXpr row(int x, int a) { return rows_.row(index(x, a)); }

  const Table& rows() const { return rows_; }
  int index(int x, int a) const { return x * num_actions_ + a; }

 private:
  int num_states_ = 0;
  int num_actions_ = 0;
  Table rows_;
};

struct MdpInstance {
  Kernel transition;  // true kernel P
  Table reward;       // r(x, a)
  double discount = 0.0;
  Vector initial;     // mu0

  int num_states() const { return transition.num_states(); }
  int num_actions() const { return transition.num_actions(); }
};

// Stationary randomized policy pi(a|x).
struct Policy {
  Table probs;

  int num_states() const { return static_cast<int>(probs.rows()); }
  int num_actions() const { return static_cast<int>(probs.cols()); }

  static Policy uniform(int num_states, int num_actions);
  static Policy deterministic(const std::vector<int>& actions, int num_actions);
};

struct ValueFunction {
  Vector v;
};

struct StationaryDistribution {
  Vector mu;
};

// d(x, a) = mu_pi(x) pi(a|x) under the true kernel.
struct StateActionFrequency {
  Table d;
};

// An MDP seen through a subjective kernel: reward, discount and initial
// distribution come from `mdp`, transitions from `kernel`.
struct SubjectiveView {
  const MdpInstance& mdp;
  const Kernel& kernel;

  int num_states() const { return mdp.num_states(); }
  int num_actions() const { return mdp.num_actions(); }
  double discount() const { return mdp.discount; }
};

inline SubjectiveView true_view(const MdpInstance& mdp) { return {mdp, mdp.transition}; }

// Throws ValidationError naming the offending field / (x, a) row.
void validate_instance(const MdpInstance& mdp);
void validate_kernel(const Kernel& kernel, const std::string& name);
void validate_policy(const Policy& pi, int num_states, int num_actions);

// P_pi(x'|x) = sum_a pi(a|x) K(x'|x,a).
Matrix induced_kernel(const Kernel& kernel, const Policy& pi);
Matrix induced_kernel(const MdpInstance& mdp, const Policy& pi);

// r_pi(x) = sum_a pi(a|x) r(x, a).
Vector policy_reward(const Table& reward, const Policy& pi);

// Throws ReducibleChainError if the support graph of `chain` is not strongly
// connected.
void check_irreducible(const Matrix& chain);

// Unique stationary distribution of an irreducible chain. Solved directly
// (one balance equation replaced by normalization), so periodic chains work.
StationaryDistribution stationary_distribution(const Matrix& chain);

StateActionFrequency state_action_frequencies(const MdpInstance& mdp, const Policy& pi);

// Rowwise renormalization of d; rows with zero mass become uniform.
Policy policy_from_frequencies(const StateActionFrequency& freq);

// Solves (I - beta K_pi) V = r_pi.
ValueFunction policy_value(const MdpInstance& mdp, const Kernel& kernel, const Policy& pi);

}  // namespace berknash
