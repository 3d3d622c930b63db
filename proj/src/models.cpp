#include "berknash/models.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "berknash/error.hpp"

namespace berknash {

std::string ParameterLabel::to_string() const {
  std::ostringstream os;
  os.precision(17);
  os << "#" << index;
  if (!value.empty()) {
    os << "(";
    for (std::size_t i = 0; i < value.size(); ++i) os << (i ? "," : "") << value[i];
    os << ")";
  }
  return os.str();
}

bool ParameterBounds::contains(const std::vector<double>& value) const {
  if (value.size() != lower.size()) return false;
  for (std::size_t i = 0; i < value.size(); ++i) {
    if (value[i] < lower[i] || value[i] > upper[i]) return false;
  }
  return true;
}

void validate_conjecture_set(const ConjectureSet& cs, const MdpInstance& mdp) {
  if (cs.members.empty()) throw ValidationError("conjecture set is empty");
  std::set<int> seen;
  for (const auto& member : cs.members) {
    if (!seen.insert(member.label.index).second) {
      throw ValidationError("duplicate conjecture label " + member.label.to_string());
    }
    if (member.kernel.num_states() != mdp.num_states() ||
        member.kernel.num_actions() != mdp.num_actions()) {
      throw ValidationError("conjecture " + member.label.to_string() +
                            " does not match the instance dimensions");
    }
    validate_kernel(member.kernel, "conjecture " + member.label.to_string());
    for (int x = 0; x < mdp.num_states(); ++x) {
      for (int a = 0; a < mdp.num_actions(); ++a) {
        for (int y = 0; y < mdp.num_states(); ++y) {
          if (mdp.transition(x, a, y) > 0.0 && member.kernel(x, a, y) <= 0.0) {
            throw AbsoluteContinuityError("conjecture " + member.label.to_string() +
                                          " assigns zero to a true transition at (x=" +
                                          std::to_string(x) + ", a=" + std::to_string(a) +
                                          ", next=" + std::to_string(y) + ")");
          }
        }
      }
    }
  }
}

double kl_divergence(std::span<const double> nu, std::span<const double> mu) {
  if (nu.size() != mu.size()) throw ValidationError("kl_divergence: size mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < nu.size(); ++i) {
    if (nu[i] <= 0.0) continue;
    if (mu[i] <= 0.0) {
      throw AbsoluteContinuityError("absolute continuity violated at coordinate " +
                                    std::to_string(i) + ": nu=" + std::to_string(nu[i]) +
                                    " but mu=0");
    }
    total += nu[i] * std::log(nu[i] / mu[i]);
  }
  // Rounding can leave a tiny negative total when nu == mu.
  return std::max(total, 0.0);
}

KlCostTable kl_cost_table(const MdpInstance& mdp, const Kernel& q) {
  const int S = mdp.num_states();
  const int m = mdp.num_actions();
  if (q.num_states() != S || q.num_actions() != m) {
    throw ValidationError("kl_cost_table: kernel dimensions do not match the instance");
  }
  KlCostTable out{Table::Zero(S, m)};
  std::vector<double> p_row(static_cast<std::size_t>(S));
  std::vector<double> q_row(static_cast<std::size_t>(S));
  for (int x = 0; x < S; ++x) {
    for (int a = 0; a < m; ++a) {
      for (int y = 0; y < S; ++y) {
        p_row[static_cast<std::size_t>(y)] = mdp.transition(x, a, y);
        q_row[static_cast<std::size_t>(y)] = q(x, a, y);
      }
      try {
        out.c(x, a) = kl_divergence(p_row, q_row);
      } catch (const AbsoluteContinuityError& e) {
        throw AbsoluteContinuityError("(x=" + std::to_string(x) + ", a=" + std::to_string(a) +
                                      "): " + e.what());
      }
    }
  }
  return out;
}

double long_run_divergence(const StateActionFrequency& d, const KlCostTable& cost) {
  return d.d.cwiseProduct(cost.c).sum();
}

std::vector<double> divergence_vector(const MdpInstance& mdp, const ConjectureSet& cs,
                                      const StateActionFrequency& d) {
  std::vector<double> out;
  out.reserve(cs.members.size());
  for (const auto& member : cs.members) {
    out.push_back(long_run_divergence(d, kl_cost_table(mdp, member.kernel)));
  }
  return out;
}

std::vector<int> pseudo_true_set(const MdpInstance& mdp, const ConjectureSet& cs,
                                 const Policy& pi, double tie_tol) {
  const auto divergences = divergence_vector(mdp, cs, state_action_frequencies(mdp, pi));
  const double best = *std::min_element(divergences.begin(), divergences.end());
  std::vector<int> out;
  for (std::size_t k = 0; k < divergences.size(); ++k) {
    if (divergences[k] <= best + tie_tol) out.push_back(static_cast<int>(k));
  }
  return out;
}

Kernel mixture_kernel(const Kernel& truth, double eps) {
  if (!(eps >= 0.0 && eps <= 1.0)) {
    throw ValidationError("mixture weight eps=" + std::to_string(eps) + " outside [0, 1]");
  }
  const double noise = eps / truth.num_states();
  Table rows = ((1.0 - eps) * truth.rows().array() + noise).matrix();
  return Kernel(truth.num_states(), truth.num_actions(), std::move(rows));
}

ConjectureSet mixture_family(const MdpInstance& mdp, std::span<const double> eps_values) {
  ConjectureSet cs;
  cs.bounds = ParameterBounds{{0.0}, {1.0}};
  int k = 0;
  for (double eps : eps_values) {
    cs.members.push_back({mixture_kernel(mdp.transition, eps), ParameterLabel{k++, {eps}}});
  }
  if (cs.members.empty()) throw ValidationError("mixture family needs at least one eps value");
  return cs;
}

}  // namespace berknash
