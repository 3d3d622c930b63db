#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>

#include "berknash/error.hpp"
#include "berknash/lp.hpp"
#include "berknash/planning.hpp"
#include "support/oracles.hpp"
#include "support/random.hpp"

using namespace berknash;
using testsupport::Gen;

namespace {

MdpInstance scalar_instance(double beta, double reward) {
  MdpInstance mdp;
  mdp.transition = Kernel(1, 1, Table::Ones(1, 1));
  mdp.reward = Table::Constant(1, 1, reward);
  mdp.discount = beta;
  mdp.initial = Vector::Ones(1);
  return mdp;
}

// Two states, two actions, both actions identical in state 0.
MdpInstance tied_instance() {
  MdpInstance mdp;
  mdp.transition = Kernel(2, 2);
  for (int x = 0; x < 2; ++x) {
    for (int a = 0; a < 2; ++a) {
      mdp.transition(x, a, 0) = 0.5;
      mdp.transition(x, a, 1) = 0.5;
    }
  }
  mdp.reward = Table(2, 2);
  mdp.reward << 1.0, 1.0, 0.0, 2.0;
  mdp.discount = 0.9;
  mdp.initial = Vector::Constant(2, 0.5);
  return mdp;
}

}  // namespace

TEST_CASE("bellman_operator with a single action is affine") {
  Gen g(41);
  const auto mdp = testsupport::random_instance(g, 4, 1, 0.7);
  const auto view = true_view(mdp);
  const Vector v = testsupport::random_vector(g, 4, -2, 2);
  const auto tv = bellman_operator(view, {v}).v;
  const Vector expected = mdp.reward.col(0) + 0.7 * mdp.transition.rows() * v;
  CHECK((tv - expected).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("bellman_operator at zero returns the best immediate reward") {
  Gen g(42);
  const auto mdp = testsupport::random_instance(g, 3, 4, 0.9);
  const auto tv = bellman_operator(true_view(mdp), {Vector::Zero(3)}).v;
  for (int x = 0; x < 3; ++x) CHECK(tv(x) == mdp.reward.row(x).maxCoeff());
}

TEST_CASE("bellman_operator is a beta-contraction") {
  Gen g(43);
  for (int trial = 0; trial < 300; ++trial) {
    const double beta = std::array<double, 3>{0.5, 0.9, 0.95}[static_cast<std::size_t>(trial % 3)];
    const auto mdp = testsupport::random_instance(g, 2 + trial % 4, 1 + trial % 3, beta);
    const auto view = true_view(mdp);
    const Vector v1 = testsupport::random_vector(g, mdp.num_states(), -10, 10);
    const Vector v2 = testsupport::random_vector(g, mdp.num_states(), -10, 10);
    const double lhs = (bellman_operator(view, {v1}).v - bellman_operator(view, {v2}).v).lpNorm<Eigen::Infinity>();
    CHECK(lhs <= beta * (v1 - v2).lpNorm<Eigen::Infinity>() * (1 + 1e-14));
  }
}

TEST_CASE("value_iteration closed forms") {
  const auto scalar = scalar_instance(0.5, 1.0);
  CHECK(std::abs(value_iteration(true_view(scalar)).v(0) - 2.0) <= 1e-10);

  Gen g(44);
  auto mdp = testsupport::random_instance(g, 3, 2, 0.9);
  mdp.reward.setConstant(0.7);
  const auto v = value_iteration(true_view(mdp)).v;
  for (int x = 0; x < 3; ++x) CHECK(std::abs(v(x) - 7.0) <= 1e-10);
  CHECK_THROWS_AS(value_iteration(true_view(mdp), 0.0), ValidationError);
}

TEST_CASE("value_iteration is within tolerance of the long-iteration oracle") {
  Gen g(45);
  for (int trial = 0; trial < 30; ++trial) {
    const auto mdp = testsupport::random_instance(g, 2 + trial % 4, 1 + trial % 3, 0.95);
    const auto v = value_iteration(true_view(mdp), 1e-10).v;
    const auto oracle = testsupport::hard_value_oracle(mdp, mdp.transition);
    for (int x = 0; x < mdp.num_states(); ++x) {
      CHECK(std::abs(v(x) - static_cast<double>(oracle[static_cast<std::size_t>(x)])) <= 1e-10);
    }
  }
}

TEST_CASE("greedy_sets singletons and ties") {
  const auto mdp = tied_instance();
  const auto view = true_view(mdp);
  const auto v = value_iteration(view);
  const auto sets = greedy_sets(view, v);
  CHECK(sets[0] == std::vector<int>{0, 1});
  CHECK(sets[1] == std::vector<int>{1});
}

TEST_CASE("greedy_sets match independent backup comparison") {
  Gen g(46);
  for (int trial = 0; trial < 50; ++trial) {
    const auto mdp = testsupport::random_instance(g, 3, 3, 0.9);
    const auto view = true_view(mdp);
    const auto v = value_iteration(view);
    const auto sets = greedy_sets(view, v, 1e-8);
    for (int x = 0; x < 3; ++x) {
      std::vector<double> q(3);
      for (int a = 0; a < 3; ++a) {
        double cont = 0.0;
        for (int y = 0; y < 3; ++y) cont += mdp.transition(x, a, y) * v.v(y);
        q[static_cast<std::size_t>(a)] = mdp.reward(x, a) + 0.9 * cont;
      }
      const double best = *std::max_element(q.begin(), q.end());
      std::vector<int> expected;
      for (int a = 0; a < 3; ++a) {
        if (q[static_cast<std::size_t>(a)] >= best - 1e-8) expected.push_back(a);
      }
      CHECK(sets[static_cast<std::size_t>(x)] == expected);
    }
  }
}

TEST_CASE("best_response_policy tie rules") {
  const auto mdp = tied_instance();
  const auto low = best_response_policy(true_view(mdp));
  CHECK(low.probs(0, 0) == 1.0);
  CHECK(low.probs(1, 1) == 1.0);
  const auto uni = best_response_policy(true_view(mdp), TieRule::kUniform);
  CHECK(uni.probs(0, 0) == 0.5);
  CHECK(uni.probs(0, 1) == 0.5);
  CHECK(uni.probs(1, 1) == 1.0);
}

TEST_CASE("best_response_policy picks the dominant action") {
  MdpInstance mdp = tied_instance();
  mdp.reward << 0.0, 1.0, 3.0, 0.0;
  const auto pi = best_response_policy(true_view(mdp));
  CHECK(pi.probs(0, 1) == 1.0);
  CHECK(pi.probs(1, 0) == 1.0);
}

TEST_CASE("primal and dual LP shapes") {
  const auto scalar = scalar_instance(0.5, 1.0);
  const auto p1 = build_primal_lp(true_view(scalar));
  CHECK(p1.num_variables() == 1);
  CHECK(p1.num_rows() == 1);
  CHECK(p1.constraints(0, 0) == doctest::Approx(0.5));
  CHECK(p1.rhs(0) == 1.0);
  CHECK_FALSE(p1.lower_bounds[0].has_value());

  const auto mdp = tied_instance();
  const auto p = build_primal_lp(true_view(mdp));
  CHECK(p.num_variables() == 2);
  CHECK(p.num_rows() == 4);
  CHECK(p.objective == Vector::Ones(2));
  CHECK(std::all_of(p.senses.begin(), p.senses.end(), [](RowSense s) { return s == RowSense::kGreaterEqual; }));
  const auto d = build_dual_lp(true_view(mdp));
  CHECK(d.num_variables() == 4);
  CHECK(d.num_rows() == 2);
  CHECK(std::all_of(d.senses.begin(), d.senses.end(), [](RowSense s) { return s == RowSense::kEqual; }));
  CHECK(std::all_of(d.lower_bounds.begin(), d.lower_bounds.end(), [](const auto& lb) { return lb && *lb == 0.0; }));
}

TEST_CASE("scalar dual LP has the single feasible point mu0 / (1 - beta)") {
  const auto scalar = scalar_instance(0.75, 2.0);
  const auto sol = simplex_solve(build_dual_lp(true_view(scalar)));
  CHECK(sol.x(0) == doctest::Approx(4.0));
  CHECK(sol.objective == doctest::Approx(8.0));
}

TEST_CASE("myopic dual LP puts mass on the best immediate action") {
  Gen g(47);
  auto mdp = testsupport::random_instance(g, 3, 3, 0.5);
  mdp.discount = 1e-300;  // effectively zero: rows reduce to sum_a eta(x, a) = mu0(x)
  const auto view = true_view(mdp);
  const auto sol = simplex_solve(build_dual_lp(view));
  const auto occ = occupation_from_solution(view, sol.x);
  for (int x = 0; x < 3; ++x) {
    Eigen::Index best = 0;
    mdp.reward.row(x).maxCoeff(&best);
    CHECK(occ.eta(x, best) == doctest::Approx(mdp.initial(x)));
  }
}

TEST_CASE("primal constraints at the value function: feasible and tight on greedy actions") {
  Gen g(48);
  for (int trial = 0; trial < 30; ++trial) {
    const auto mdp = testsupport::random_instance(g, 3, 2, 0.9);
    const auto view = true_view(mdp);
    const auto pi = best_response_policy(view);
    const Vector V = policy_value(mdp, mdp.transition, pi).v;
    const auto lp = build_primal_lp(view);
    const Vector slack = lp.constraints * V - lp.rhs;
    CHECK(slack.minCoeff() >= -1e-9);
    for (int x = 0; x < 3; ++x) {
      for (int a = 0; a < 2; ++a) {
        if (pi.probs(x, a) > 0) CHECK(std::abs(slack(mdp.transition.index(x, a))) <= 1e-12);
      }
    }
  }
}

TEST_CASE("LP optima agree with value iteration and each other") {
  Gen g(49);
  for (int trial = 0; trial < 40; ++trial) {
    const int S = 1 + trial % 5;
    const int m = 1 + trial % 4;
    const auto mdp = testsupport::random_instance(g, S, m, 0.9);
    const auto view = true_view(mdp);
    const auto V = value_iteration(view, 1e-11).v;
    const auto primal = simplex_solve(build_primal_lp(view));
    const auto dual = simplex_solve(build_dual_lp(view));
    CHECK(std::abs(primal.objective - V.sum()) <= 1e-7);
    CHECK(std::abs(dual.objective - mdp.initial.dot(V)) <= 1e-8);
    const auto occ = occupation_from_solution(view, dual.x);
    CHECK(flow_residual(view, occ) <= 1e-9);
    CHECK(std::abs(occ.eta.sum() - 1.0 / (1.0 - 0.9)) <= 1e-8);
    const auto q = action_backups(view, primal.x);
    const auto sets = greedy_sets(view, {V});
    const auto pi = policy_from_occupation(occ);
    for (int x = 0; x < S; ++x) {
      for (int a = 0; a < m; ++a) {
        if (occ.eta(x, a) > 1e-8) CHECK(std::abs(primal.x(x) - q(x, a)) <= 1e-8);
        if (pi.probs(x, a) > 0 && occ.eta.row(x).sum() > 1e-12) {
          const auto& s = sets[static_cast<std::size_t>(x)];
          CHECK(std::find(s.begin(), s.end(), a) != s.end());
        }
      }
    }
  }
}

TEST_CASE("with uniform initial distribution the primal optimum is S times the dual") {
  Gen g(50);
  auto mdp = testsupport::random_instance(g, 4, 2, 0.8);
  mdp.initial = Vector::Constant(4, 0.25);
  const auto view = true_view(mdp);
  const auto primal = simplex_solve(build_primal_lp(view));
  const auto dual = simplex_solve(build_dual_lp(view));
  CHECK(std::abs(primal.objective - 4.0 * dual.objective) <= 1e-8);
}

TEST_CASE("policy_from_occupation normalizes rows and falls back") {
  OccupationMeasure occ{Table(2, 2)};
  occ.eta << 0.3, 0.1, 0.0, 0.0;
  const auto pi = policy_from_occupation(occ);
  CHECK(pi.probs(0, 0) == doctest::Approx(0.75));
  CHECK(pi.probs(0, 1) == doctest::Approx(0.25));
  CHECK(pi.probs(1, 0) == 0.5);
  CHECK(pi.probs(1, 1) == 0.5);
  const auto with_fallback = policy_from_occupation(occ, Policy::deterministic({0, 1}, 2));
  CHECK(with_fallback.probs(1, 1) == 1.0);
  occ.eta(1, 0) = -1e-6;
  CHECK_THROWS_AS(policy_from_occupation(occ), ValidationError);
  occ.eta(1, 0) = 0.0;
  CHECK_THROWS_AS(policy_from_occupation(occ, Policy::uniform(3, 2)), ValidationError);
}

TEST_CASE("occupation_of_policy closed forms and round trip") {
  const auto scalar = scalar_instance(0.6, 1.0);
  const auto occ = occupation_of_policy(true_view(scalar), Policy::uniform(1, 1));
  CHECK(occ.eta(0, 0) == doctest::Approx(2.5));

  Gen g(51);
  auto myopic = testsupport::random_instance(g, 3, 2, 1e-12);
  const auto pi = testsupport::random_policy(g, 3, 2);
  const auto occ0 = occupation_of_policy(true_view(myopic), pi);
  for (int x = 0; x < 3; ++x) {
    for (int a = 0; a < 2; ++a) CHECK(std::abs(occ0.eta(x, a) - myopic.initial(x) * pi.probs(x, a)) <= 1e-10);
  }

  for (int trial = 0; trial < 30; ++trial) {
    const auto mdp = testsupport::random_instance(g, 3, 3, 0.9);
    const auto view = true_view(mdp);
    const auto p = testsupport::random_policy(g, 3, 3);
    const auto o = occupation_of_policy(view, p);
    CHECK(flow_residual(view, o) <= 1e-10);
    CHECK((policy_from_occupation(o).probs - p.probs).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("greedy occupation reaches the dual optimum") {
  Gen g(52);
  for (int trial = 0; trial < 20; ++trial) {
    const auto mdp = testsupport::random_instance(g, 4, 2, 0.95);
    const auto view = true_view(mdp);
    const auto occ = occupation_of_policy(view, best_response_policy(view));
    const auto dual = simplex_solve(build_dual_lp(view));
    CHECK(std::abs(occ.eta.cwiseProduct(mdp.reward).sum() - dual.objective) <= 1e-8);
  }
}

TEST_CASE("flow_residual flags broken flows and negative mass") {
  Gen g(53);
  const auto mdp = testsupport::random_instance(g, 3, 2, 0.9);
  const auto view = true_view(mdp);
  auto occ = occupation_of_policy(view, Policy::uniform(3, 2));
  occ.eta(1, 0) += 0.05;
  CHECK(flow_residual(view, occ) > 0.01);
  occ = occupation_of_policy(view, Policy::uniform(3, 2));
  occ.eta(2, 1) = -0.5;
  CHECK(flow_residual(view, occ) >= 0.5);
}
