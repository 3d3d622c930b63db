#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "berknash/models.hpp"
#include "berknash/planning.hpp"
#include "berknash/soft_planning.hpp"

namespace berknash {

inline constexpr double kDefaultFeasibilityTol = 1e-7;

// (k, eta, d, pi): model index, subjective occupation measure under Q_k, true
// stationary state-action frequencies, and the shared policy.
struct JointCandidate {
  int model = 0;
  OccupationMeasure eta;
  StateActionFrequency d;
  Policy pi;
};

enum class ConditionGroup {
  kSubjectiveFlow,     // eta satisfies the discounted flow equations under Q_k
  kTrueFrequencies,    // d is a stationary state-action distribution under P
  kPolicyConsistency,  // pi matches eta and d on states with positive mass
  kKlMinimality,       // D_k(d) <= D_l(d) for every l
};

const char* condition_name(ConditionGroup group);

struct FeasibilityReport {
  bool pass = false;
  double subjective_flow = 0.0;
  double true_frequencies = 0.0;
  double policy_consistency = 0.0;
  double kl_minimality = 0.0;  // max_l (D_k - D_l), floored at 0
  std::vector<double> divergences;
  std::vector<ConditionGroup> failed;
  // Diagnostic only: sum mu0 V_k - sum r eta. Zero when eta is subjectively
  // optimal; not part of pass/fail.
  double optimality_gap = 0.0;
};

FeasibilityReport check_joint_feasibility(const MdpInstance& mdp, const ConjectureSet& cs,
                                          const JointCandidate& candidate,
                                          double tol = kDefaultFeasibilityTol);

// Assembles (k, occupation_of_policy, state_action_frequencies, pi).
JointCandidate make_candidate(const MdpInstance& mdp, const ConjectureSet& cs, int model,
                              const Policy& pi);

struct EquilibriumMode {
  enum class Kind { kHard, kSoft };
  Kind kind = Kind::kHard;
  SoftPlanConfig soft;

  static EquilibriumMode hard() { return {}; }
  static EquilibriumMode entropy(const SoftPlanConfig& cfg) { return {Kind::kSoft, cfg}; }
};

struct CandidateRecord {
  int model = 0;
  std::string rule;  // "lowest-index", "uniform" or "softmax"
  Policy pi;
  std::vector<double> divergences;
  bool accepted = false;
  std::optional<FeasibilityReport> feasibility;
  std::string diagnostic;
};

struct Equilibrium {
  int model = 0;
  Policy pi;
  double divergence = 0.0;
  std::vector<double> divergences;
};

struct EquilibriumReport {
  std::vector<Equilibrium> equilibria;
  std::vector<CandidateRecord> candidates;  // in model order, then rule order
};

// For every model, best-respond (hard: deterministic BR under each tie rule;
// soft: softmax BR), compute the true frequencies and accept the model iff it
// minimizes long-run divergence within tol. Accepted candidates are
// re-verified with check_joint_feasibility.
EquilibriumReport enumerate_equilibria(const MdpInstance& mdp, const ConjectureSet& cs,
                                       const EquilibriumMode& mode,
                                       double tol = kDefaultFeasibilityTol);

// J_lambda(theta_k) = D(theta_k | pi_{theta_k, lambda}).
double bilevel_objective(const MdpInstance& mdp, const ConjectureSet& cs, int model,
                         const SoftPlanConfig& cfg);

struct EntropySelection {
  int best = 0;
  std::vector<double> objectives;
};

// argmin_k J_lambda(theta_k), lowest index among values within 1e-9.
EntropySelection entropy_bn_select(const MdpInstance& mdp, const ConjectureSet& cs,
                                   const SoftPlanConfig& cfg);

// One row per candidate: k, rule, accepted, D_0..D_{K-1}, residuals.
void write_report_csv(std::ostream& os, const EquilibriumReport& report, const ConjectureSet& cs);
void write_report_summary(std::ostream& os, const EquilibriumReport& report,
                          const ConjectureSet& cs);

}  // namespace berknash
