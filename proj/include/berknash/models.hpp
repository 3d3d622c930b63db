#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "berknash/mdp.hpp"

namespace berknash {

inline constexpr double kDefaultTieTol = 1e-9;

// Identifies a conjecture. Finite sets use `index` only; zooming grids also
// carry a real parameter vector (for the mixture family, value = {epsilon}).
struct ParameterLabel {
  int index = 0;
  std::vector<double> value;

  std::string to_string() const;
};

struct SubjectiveKernel {
  Kernel kernel;
  ParameterLabel label;
};

// Axis-aligned box in parameter space.
struct ParameterBounds {
  std::vector<double> lower;
  std::vector<double> upper;

  bool contains(const std::vector<double>& value) const;
};

struct ConjectureSet {
  std::vector<SubjectiveKernel> members;
  std::optional<ParameterBounds> bounds;

  int size() const { return static_cast<int>(members.size()); }
  const SubjectiveKernel& operator[](int k) const { return members[static_cast<std::size_t>(k)]; }
};

// c(x, a) = KL(P(.|x,a) || Q(.|x,a)).
struct KlCostTable {
  Table c;
};

// Nonempty, unique labels, every member row-stochastic, shaped like `mdp` and
// positive wherever the true kernel is (AbsoluteContinuityError otherwise).
void validate_conjecture_set(const ConjectureSet& cs, const MdpInstance& mdp);

// KL(nu || mu) with 0 log 0 = 0. Throws AbsoluteContinuityError if some
// coordinate has nu > 0 and mu == 0.
double kl_divergence(std::span<const double> nu, std::span<const double> mu);

KlCostTable kl_cost_table(const MdpInstance& mdp, const Kernel& q);

// D(d) = sum_{x,a} d(x,a) c(x,a).
double long_run_divergence(const StateActionFrequency& d, const KlCostTable& cost);

// (D_l(d))_l over every member of the set.
std::vector<double> divergence_vector(const MdpInstance& mdp, const ConjectureSet& cs,
                                      const StateActionFrequency& d);

// Every index whose long-run divergence under `pi` is within `tie_tol` of the
// minimum. Indices are zero-based and ascending.
std::vector<int> pseudo_true_set(const MdpInstance& mdp, const ConjectureSet& cs,
                                 const Policy& pi, double tie_tol = kDefaultTieTol);

// Q_eps = (1 - eps) P + eps / S.
Kernel mixture_kernel(const Kernel& truth, double eps);

// One member per eps, labelled (k, {eps_k}), bounds [0, 1].
ConjectureSet mixture_family(const MdpInstance& mdp, std::span<const double> eps_values);

}  // namespace berknash
