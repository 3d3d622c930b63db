#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "berknash/equilibrium.hpp"
#include "berknash/error.hpp"
#include "berknash/harness/benchmark.hpp"
#include "support/oracles.hpp"
#include "support/random.hpp"

using namespace berknash;
using testsupport::Gen;

namespace {

ConjectureSet tabular(const std::vector<Kernel>& kernels) {
  ConjectureSet cs;
  for (std::size_t k = 0; k < kernels.size(); ++k) {
    cs.members.push_back({kernels[k], ParameterLabel{static_cast<int>(k), {}}});
  }
  return cs;
}

bool has_model(const EquilibriumReport& r, int k) {
  return std::any_of(r.equilibria.begin(), r.equilibria.end(),
                     [k](const Equilibrium& e) { return e.model == k; });
}

bool failed(const FeasibilityReport& r, ConditionGroup g) {
  return std::find(r.failed.begin(), r.failed.end(), g) != r.failed.end();
}

SoftPlanConfig soft(double lambda) {
  SoftPlanConfig cfg;
  cfg.temperature = lambda;
  return cfg;
}

}  // namespace

TEST_CASE("condition names") {
  CHECK(std::string(condition_name(ConditionGroup::kSubjectiveFlow)) == "subjective-flow");
  CHECK(std::string(condition_name(ConditionGroup::kKlMinimality)) == "kl-minimality");
}

TEST_CASE("constructed candidate at the benchmark best response is jointly feasible") {
  const auto b = harness::benchmark3();
  const auto pi = best_response_policy({b.mdp, b.family[0].kernel});
  const auto cand = make_candidate(b.mdp, b.family, 0, pi);
  const auto rep = check_joint_feasibility(b.mdp, b.family, cand);
  CHECK(rep.pass);
  CHECK(rep.failed.empty());
  CHECK(rep.subjective_flow <= 1e-10);
  CHECK(rep.true_frequencies <= 1e-12);
  CHECK(rep.policy_consistency <= 1e-12);
  CHECK(rep.kl_minimality == 0.0);
  CHECK(std::abs(rep.optimality_gap) <= 1e-8);
  CHECK(rep.divergences.size() == 4);
}

TEST_CASE("perturbed true frequencies are rejected") {
  const auto b = harness::benchmark3();
  const auto pi = best_response_policy({b.mdp, b.family[0].kernel});
  auto cand = make_candidate(b.mdp, b.family, 0, pi);
  cand.d.d(0, 0) += 0.01;
  cand.d.d /= cand.d.d.sum();
  const auto rep = check_joint_feasibility(b.mdp, b.family, cand);
  CHECK_FALSE(rep.pass);
  CHECK(failed(rep, ConditionGroup::kTrueFrequencies));
  CHECK(rep.true_frequencies > 1e-4);
}

TEST_CASE("perturbed subjective flow and policy are rejected") {
  const auto b = harness::benchmark3();
  const auto pi = best_response_policy({b.mdp, b.family[0].kernel});
  auto cand = make_candidate(b.mdp, b.family, 0, pi);
  cand.eta.eta *= 1.01;
  CHECK(failed(check_joint_feasibility(b.mdp, b.family, cand), ConditionGroup::kSubjectiveFlow));

  auto cand2 = make_candidate(b.mdp, b.family, 0, pi);
  cand2.pi = Policy::uniform(3, 2);
  CHECK(failed(check_joint_feasibility(b.mdp, b.family, cand2), ConditionGroup::kPolicyConsistency));
}

TEST_CASE("the noisiest benchmark model fails KL-minimality") {
  const auto b = harness::benchmark3();
  const auto pi = best_response_policy({b.mdp, b.family[3].kernel});
  const auto cand = make_candidate(b.mdp, b.family, 3, pi);
  const auto rep = check_joint_feasibility(b.mdp, b.family, cand);
  CHECK_FALSE(rep.pass);
  CHECK(failed(rep, ConditionGroup::kKlMinimality));
  CHECK(rep.kl_minimality > 0.0);
}

TEST_CASE("feasibility rejects malformed candidates") {
  const auto b = harness::benchmark3();
  auto cand = make_candidate(b.mdp, b.family, 0, Policy::uniform(3, 2));
  cand.model = 7;
  CHECK_THROWS_AS(check_joint_feasibility(b.mdp, b.family, cand), ValidationError);
  cand.model = 0;
  cand.pi = Policy::uniform(2, 2);
  CHECK_THROWS_AS(check_joint_feasibility(b.mdp, b.family, cand), ValidationError);
}

TEST_CASE("a singleton set holding the true model is an equilibrium with zero divergence") {
  Gen g(71);
  for (int trial = 0; trial < 20; ++trial) {
    const auto mdp = testsupport::random_instance(g, 3, 2, 0.9);
    const auto rep = enumerate_equilibria(mdp, tabular({mdp.transition}), EquilibriumMode::hard());
    REQUIRE(rep.equilibria.size() >= 1);
    CHECK(rep.equilibria[0].model == 0);
    CHECK(std::abs(rep.equilibria[0].divergence) <= 1e-12);
  }
}

TEST_CASE("any set containing the true kernel yields an equilibrium at it") {
  Gen g(72);
  for (int trial = 0; trial < 30; ++trial) {
    const auto mdp = testsupport::random_instance(g, 3, 2, 0.9);
    std::vector<Kernel> kernels;
    for (int j = 0; j < 3; ++j) kernels.push_back(testsupport::random_kernel(g, 3, 2));
    const int slot = trial % 4;
    kernels.insert(kernels.begin() + slot, mdp.transition);
    const auto cs = tabular(kernels);
    const auto rep = enumerate_equilibria(mdp, cs, EquilibriumMode::hard());
    CHECK(has_model(rep, slot));
    for (const auto& eq : rep.equilibria) {
      const double best = *std::min_element(eq.divergences.begin(), eq.divergences.end());
      CHECK(eq.divergence <= best + kDefaultFeasibilityTol);
    }
  }
}

TEST_CASE("every accepted candidate passes the joint feasibility re-check") {
  Gen g(73);
  for (int trial = 0; trial < 30; ++trial) {
    const auto mdp = testsupport::random_instance(g, 3 + trial % 2, 2, 0.9);
    std::vector<Kernel> kernels;
    for (int j = 0; j < 4; ++j) kernels.push_back(testsupport::random_kernel(g, mdp.num_states(), 2));
    const auto cs = tabular(kernels);
    const auto rep = enumerate_equilibria(mdp, cs, EquilibriumMode::hard());
    for (const auto& rec : rep.candidates) {
      if (!rec.accepted) continue;
      REQUIRE(rec.feasibility.has_value());
      CHECK(rec.feasibility->pass);
      CHECK(std::abs(rec.feasibility->optimality_gap) <= 1e-7);
    }
  }
}

TEST_CASE("benchmark equilibrium sits at the least noisy model in both modes") {
  const auto b = harness::benchmark3();
  const auto hard = enumerate_equilibria(b.mdp, b.family, EquilibriumMode::hard());
  REQUIRE(hard.equilibria.size() == 1);
  CHECK(hard.equilibria[0].model == 0);
  CHECK(hard.candidates.size() == 4);

  const auto sm = enumerate_equilibria(b.mdp, b.family, EquilibriumMode::entropy(soft(0.1)));
  REQUIRE(sm.equilibria.size() == 1);
  CHECK(sm.equilibria[0].model == 0);
  CHECK(sm.candidates[0].rule == "softmax");
}

TEST_CASE("soft-mode equilibria are self-consistent") {
  const auto b = harness::benchmark3();
  for (double lambda : {0.01, 0.1, 1.0}) {
    const auto rep = enumerate_equilibria(b.mdp, b.family, EquilibriumMode::entropy(soft(lambda)));
    for (const auto& eq : rep.equilibria) {
      const auto br = soft_best_response({b.mdp, b.family[eq.model].kernel}, soft(lambda)).policy;
      CHECK((br.probs - eq.pi.probs).cwiseAbs().maxCoeff() <= 1e-12);
      const auto d = state_action_frequencies(b.mdp, eq.pi);
      const auto D = divergence_vector(b.mdp, b.family, d);
      CHECK(D[static_cast<std::size_t>(eq.model)] <= *std::min_element(D.begin(), D.end()) + 1e-7);
    }
  }
}

TEST_CASE("equilibria are equivariant under permutation of the set") {
  Gen g(74);
  for (int trial = 0; trial < 15; ++trial) {
    const auto mdp = testsupport::random_instance(g, 3, 2, 0.9);
    std::vector<Kernel> kernels;
    for (int j = 0; j < 4; ++j) kernels.push_back(testsupport::random_kernel(g, 3, 2));
    const std::vector<int> perm{2, 0, 3, 1};
    std::vector<Kernel> permuted;
    for (int j : perm) permuted.push_back(kernels[static_cast<std::size_t>(j)]);
    const auto a = enumerate_equilibria(mdp, tabular(kernels), EquilibriumMode::hard());
    const auto b = enumerate_equilibria(mdp, tabular(permuted), EquilibriumMode::hard());
    REQUIRE(a.equilibria.size() == b.equilibria.size());
    for (const auto& eq : b.equilibria) {
      CHECK(has_model(a, perm[static_cast<std::size_t>(eq.model)]));
    }
  }
}

TEST_CASE("reducible best responses are skipped with a diagnostic") {
  // a = 0 stays put, a = 1 switches; only staying in state 0 pays, so the
  // best response makes state 0 absorbing.
  MdpInstance mdp;
  Table rows(4, 2);
  rows << 1, 0,  //
      0, 1,      //
      0, 1,      //
      1, 0;
  mdp.transition = Kernel(2, 2, rows);
  mdp.reward = Table(2, 2);
  mdp.reward << 1, 0, 0, 0;
  mdp.discount = 0.9;
  mdp.initial = Vector::Constant(2, 0.5);
  const auto cs = tabular({mdp.transition});
  const auto rep = enumerate_equilibria(mdp, cs, EquilibriumMode::hard());
  CHECK(rep.equilibria.empty());
  REQUIRE(rep.candidates.size() == 1);
  CHECK(rep.candidates[0].diagnostic.rfind("skipped:", 0) == 0);
  CHECK_FALSE(rep.candidates[0].accepted);
  std::ostringstream os;
  write_report_summary(os, rep, cs);
  CHECK(os.str().find("equilibria found: 0") != std::string::npos);
  CHECK(os.str().find("skipped:") != std::string::npos);
}

TEST_CASE("tied best responses add a uniform-rule candidate") {
  Gen g(75);
  auto mdp = testsupport::random_instance(g, 2, 2, 0.9);
  // Identical actions: every state is a two-way tie.
  for (int x = 0; x < 2; ++x) {
    mdp.transition.row(x, 1) = mdp.transition.row(x, 0);
    mdp.reward(x, 1) = mdp.reward(x, 0);
  }
  const auto rep = enumerate_equilibria(mdp, tabular({mdp.transition}), EquilibriumMode::hard());
  REQUIRE(rep.candidates.size() == 2);
  CHECK(rep.candidates[0].rule == "lowest-index");
  CHECK(rep.candidates[1].rule == "uniform");
  CHECK(rep.equilibria.size() == 2);
}

TEST_CASE("bilevel objective vanishes when the model is exact") {
  Gen g(76);
  const auto mdp = testsupport::random_instance(g, 3, 2, 0.9);
  CHECK(std::abs(bilevel_objective(mdp, tabular({mdp.transition}), 0, soft(0.1))) <= 1e-15);

  // Uniform rows are fixed points of the mixture map, so every member is exact.
  auto flat = mdp;
  flat.transition = Kernel(3, 2, Table::Constant(6, 3, 1.0 / 3));
  const std::vector<double> eps{0.0, 0.3, 0.9};
  const auto family = mixture_family(flat, eps);
  for (int k = 0; k < 3; ++k) CHECK(std::abs(bilevel_objective(flat, family, k, soft(0.1))) <= 1e-15);
  CHECK_THROWS_AS(bilevel_objective(flat, family, 3, soft(0.1)), ValidationError);
}

TEST_CASE("bilevel objective matches a hand composition with oracles") {
  const auto b = harness::benchmark3();
  for (int k = 0; k < 4; ++k) {
    const auto& q = b.family[k].kernel;
    const auto pi = soft_best_response({b.mdp, q}, soft(0.1)).policy;
    const auto mu = testsupport::power_iteration_stationary(induced_kernel(b.mdp, pi));
    long double J = 0;
    for (int x = 0; x < 3; ++x) {
      for (int a = 0; a < 2; ++a) {
        std::vector<double> p(3), qq(3);
        for (int y = 0; y < 3; ++y) {
          p[static_cast<std::size_t>(y)] = b.mdp.transition(x, a, y);
          qq[static_cast<std::size_t>(y)] = q(x, a, y);
        }
        J += mu[static_cast<std::size_t>(x)] * pi.probs(x, a) * testsupport::kl_oracle(p, qq);
      }
    }
    CHECK(std::abs(bilevel_objective(b.mdp, b.family, k, soft(0.1)) - static_cast<double>(J)) <= 1e-10);
  }
}

TEST_CASE("entropy selection on the benchmark") {
  const auto b = harness::benchmark3();
  const auto sel = entropy_bn_select(b.mdp, b.family, soft(harness::kBenchmarkTemperature));
  CHECK(sel.best == 0);
  REQUIRE(sel.objectives.size() == 4);
  for (std::size_t k = 1; k < 4; ++k) CHECK(sel.objectives[k] > sel.objectives[k - 1]);
  CHECK(sel.objectives[0] > 0.0);
}

TEST_CASE("entropy selection breaks ties toward the lowest index") {
  Gen g(77);
  const auto mdp = testsupport::random_instance(g, 3, 2, 0.9);
  const auto other = testsupport::random_kernel(g, 3, 2);
  const auto sel = entropy_bn_select(mdp, tabular({other, mdp.transition, mdp.transition}), soft(0.1));
  CHECK(sel.best == 1);
  CHECK_THROWS_AS(entropy_bn_select(mdp, ConjectureSet{}, soft(0.1)), ValidationError);
}

TEST_CASE("report CSV lists one row per candidate") {
  const auto b = harness::benchmark3();
  const auto rep = enumerate_equilibria(b.mdp, b.family, EquilibriumMode::hard());
  std::ostringstream os;
  write_report_csv(os, rep, b.family);
  const std::string text = os.str();
  CHECK(text.rfind("k,label,rule,accepted,D_0,D_1,D_2,D_3,res_subjective_flow", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 5);
  std::ostringstream summary;
  write_report_summary(summary, rep, b.family);
  CHECK(summary.str().find("equilibria found: 1") != std::string::npos);
}
