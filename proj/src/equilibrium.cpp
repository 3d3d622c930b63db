#include "berknash/equilibrium.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "berknash/csv.hpp"
#include "berknash/error.hpp"

namespace berknash {

const char* condition_name(ConditionGroup group) {
  switch (group) {
    case ConditionGroup::kSubjectiveFlow: return "subjective-flow";
    case ConditionGroup::kTrueFrequencies: return "true-frequencies";
    case ConditionGroup::kPolicyConsistency: return "policy-consistency";
    case ConditionGroup::kKlMinimality: return "kl-minimality";
  }
  return "unknown";
}

namespace {

constexpr double kPositiveMass = 1e-12;

double true_frequency_residual(const MdpInstance& mdp, const StateActionFrequency& freq) {
  const int S = mdp.num_states();
  const int m = mdp.num_actions();
  double residual = std::abs(freq.d.sum() - 1.0);
  Vector inflow = Vector::Zero(S);
  for (int x = 0; x < S; ++x) {
    for (int a = 0; a < m; ++a) inflow += freq.d(x, a) * mdp.transition.row(x, a).transpose();
  }
  const Vector outflow = freq.d.rowwise().sum();
  residual = std::max(residual, (outflow - inflow).lpNorm<Eigen::Infinity>());
  return std::max(residual, std::max(0.0, -freq.d.minCoeff()));
}

double consistency_residual(const Table& mass, const Policy& pi) {
  double residual = 0.0;
  for (Eigen::Index x = 0; x < mass.rows(); ++x) {
    const double total = mass.row(x).sum();
    if (total <= kPositiveMass) continue;
    residual = std::max(residual, (mass.row(x) / total - pi.probs.row(x)).cwiseAbs().maxCoeff());
  }
  return residual;
}

}  // namespace

FeasibilityReport check_joint_feasibility(const MdpInstance& mdp, const ConjectureSet& cs,
                                          const JointCandidate& candidate, double tol) {
  const int S = mdp.num_states();
  const int m = mdp.num_actions();
  if (candidate.model < 0 || candidate.model >= cs.size()) {
    throw ValidationError("candidate model index out of range");
  }
  auto shaped = [&](const Table& t) { return t.rows() == S && t.cols() == m; };
  if (!shaped(candidate.eta.eta) || !shaped(candidate.d.d) || !shaped(candidate.pi.probs)) {
    throw ValidationError("candidate tables do not match the instance dimensions");
  }

  const SubjectiveView view{mdp, cs[candidate.model].kernel};
  FeasibilityReport report;
  report.subjective_flow = flow_residual(view, candidate.eta);
  report.true_frequencies = true_frequency_residual(mdp, candidate.d);

  double row_error = 0.0;
  for (int x = 0; x < S; ++x) {
    row_error = std::max(row_error, std::abs(candidate.pi.probs.row(x).sum() - 1.0));
  }
  row_error = std::max(row_error, std::max(0.0, -candidate.pi.probs.minCoeff()));
  report.policy_consistency = std::max({row_error, consistency_residual(candidate.eta.eta, candidate.pi),
                                        consistency_residual(candidate.d.d, candidate.pi)});

  report.divergences = divergence_vector(mdp, cs, candidate.d);
  const double own = report.divergences[static_cast<std::size_t>(candidate.model)];
  const double best = *std::min_element(report.divergences.begin(), report.divergences.end());
  report.kl_minimality = std::max(0.0, own - best);

  if (report.subjective_flow > tol) report.failed.push_back(ConditionGroup::kSubjectiveFlow);
  if (report.true_frequencies > tol) report.failed.push_back(ConditionGroup::kTrueFrequencies);
  if (report.policy_consistency > tol) report.failed.push_back(ConditionGroup::kPolicyConsistency);
  if (report.kl_minimality > tol) report.failed.push_back(ConditionGroup::kKlMinimality);
  report.pass = report.failed.empty();

  const auto v = value_iteration(view);
  report.optimality_gap =
      mdp.initial.dot(v.v) - candidate.eta.eta.cwiseProduct(mdp.reward).sum();
  return report;
}

JointCandidate make_candidate(const MdpInstance& mdp, const ConjectureSet& cs, int model,
                              const Policy& pi) {
  const SubjectiveView view{mdp, cs[model].kernel};
  return {model, occupation_of_policy(view, pi), state_action_frequencies(mdp, pi), pi};
}

EquilibriumReport enumerate_equilibria(const MdpInstance& mdp, const ConjectureSet& cs,
                                       const EquilibriumMode& mode, double tol) {
  validate_instance(mdp);
  validate_conjecture_set(cs, mdp);
  EquilibriumReport report;
  for (int k = 0; k < cs.size(); ++k) {
    const SubjectiveView view{mdp, cs[k].kernel};
    std::vector<std::pair<std::string, Policy>> responses;
    bool tied = false;
    if (mode.kind == EquilibriumMode::Kind::kHard) {
      const auto sets = greedy_sets(view, value_iteration(view));
      tied = std::any_of(sets.begin(), sets.end(), [](const auto& s) { return s.size() > 1; });
      responses.emplace_back("lowest-index", greedy_policy(sets, mdp.num_actions(), TieRule::kLowestIndex));
      if (tied) {
        responses.emplace_back("uniform", greedy_policy(sets, mdp.num_actions(), TieRule::kUniform));
      }
    } else {
      responses.emplace_back("softmax", soft_best_response(view, mode.soft).policy);
    }

    for (auto& [rule, pi] : responses) {
      CandidateRecord record;
      record.model = k;
      record.rule = rule;
      record.pi = pi;
      JointCandidate candidate;
      try {
        candidate = make_candidate(mdp, cs, k, pi);
      } catch (const ReducibleChainError& e) {
        record.diagnostic = std::string("skipped: ") + e.what();
        report.candidates.push_back(std::move(record));
        continue;
      }
      record.divergences = divergence_vector(mdp, cs, candidate.d);
      const double best = *std::min_element(record.divergences.begin(), record.divergences.end());
      const double own = record.divergences[static_cast<std::size_t>(k)];
      record.accepted = own <= best + tol;
      if (record.accepted) {
        record.feasibility = check_joint_feasibility(mdp, cs, candidate, tol);
        if (!record.feasibility->pass) {
          record.accepted = false;
          record.diagnostic = "rejected: joint feasibility re-check failed";
        }
      } else if (tied) {
        record.diagnostic = "best response not unique; interior randomizations not explored";
      }
      if (record.accepted) {
        report.equilibria.push_back({k, pi, own, record.divergences});
      }
      report.candidates.push_back(std::move(record));
    }
  }
  return report;
}

double bilevel_objective(const MdpInstance& mdp, const ConjectureSet& cs, int model,
                         const SoftPlanConfig& cfg) {
  if (model < 0 || model >= cs.size()) throw ValidationError("model index out of range");
  const SubjectiveView view{mdp, cs[model].kernel};
  const auto response = soft_best_response(view, cfg);
  const auto d = state_action_frequencies(mdp, response.policy);
  return long_run_divergence(d, kl_cost_table(mdp, cs[model].kernel));
}

EntropySelection entropy_bn_select(const MdpInstance& mdp, const ConjectureSet& cs,
                                   const SoftPlanConfig& cfg) {
  if (cs.members.empty()) throw ValidationError("conjecture set is empty");
  EntropySelection out;
  for (int k = 0; k < cs.size(); ++k) out.objectives.push_back(bilevel_objective(mdp, cs, k, cfg));
  const double best = *std::min_element(out.objectives.begin(), out.objectives.end());
  for (int k = 0; k < cs.size(); ++k) {
    if (out.objectives[static_cast<std::size_t>(k)] <= best + 1e-9) {
      out.best = k;
      break;
    }
  }
  return out;
}

void write_report_csv(std::ostream& os, const EquilibriumReport& report, const ConjectureSet& cs) {
  std::vector<std::string> header{"k", "label", "rule", "accepted"};
  for (int l = 0; l < cs.size(); ++l) header.push_back("D_" + std::to_string(l));
  for (const char* h : {"res_subjective_flow", "res_true_frequencies", "res_policy_consistency",
                        "res_kl_minimality", "optimality_gap", "diagnostic"}) {
    header.emplace_back(h);
  }
  csv::write_row(os, header);
  for (const auto& rec : report.candidates) {
    std::vector<std::string> row{csv::number(rec.model), cs[rec.model].label.to_string(), rec.rule,
                                 rec.accepted ? "1" : "0"};
    for (int l = 0; l < cs.size(); ++l) {
      row.push_back(rec.divergences.empty() ? ""
                                            : csv::number(rec.divergences[static_cast<std::size_t>(l)]));
    }
    if (rec.feasibility) {
      const auto& f = *rec.feasibility;
      for (double r : {f.subjective_flow, f.true_frequencies, f.policy_consistency, f.kl_minimality,
                       f.optimality_gap}) {
        row.push_back(csv::number(r));
      }
    } else {
      row.insert(row.end(), 5, "");
    }
    row.push_back(rec.diagnostic);
    csv::write_row(os, row);
  }
}

void write_report_summary(std::ostream& os, const EquilibriumReport& report,
                          const ConjectureSet& cs) {
  os << "candidates evaluated: " << report.candidates.size() << '\n';
  os << "equilibria found: " << report.equilibria.size() << '\n';
  for (const auto& eq : report.equilibria) {
    os << "  model " << cs[eq.model].label.to_string() << "  D=" << csv::number(eq.divergence)
       << "  policy:";
    for (Eigen::Index x = 0; x < eq.pi.probs.rows(); ++x) {
      os << " [";
      for (Eigen::Index a = 0; a < eq.pi.probs.cols(); ++a) {
        os << (a ? " " : "") << csv::number(eq.pi.probs(x, a));
      }
      os << ']';
    }
    os << '\n';
  }
  for (const auto& rec : report.candidates) {
    if (!rec.diagnostic.empty()) {
      os << "  note: model " << cs[rec.model].label.to_string() << " (" << rec.rule
         << "): " << rec.diagnostic << '\n';
    }
  }
}

}  // namespace berknash
