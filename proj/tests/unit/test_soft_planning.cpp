#include <doctest.h>

#include <array>
#include <cmath>

#include "berknash/error.hpp"
#include "berknash/harness/benchmark.hpp"
#include "berknash/planning.hpp"
#include "berknash/soft_planning.hpp"
#include "support/oracles.hpp"
#include "support/random.hpp"

using namespace berknash;
using testsupport::Gen;

namespace {

MdpInstance one_state(int m, double reward, double beta) {
  MdpInstance mdp;
  mdp.transition = Kernel(1, m, Table::Ones(m, 1));
  mdp.reward = Table::Constant(1, m, reward);
  mdp.discount = beta;
  mdp.initial = Vector::Ones(1);
  return mdp;
}

SoftPlanConfig at(double lambda, double fp_tol = 1e-10) {
  SoftPlanConfig cfg;
  cfg.temperature = lambda;
  cfg.fp_tol = fp_tol;
  return cfg;
}

}  // namespace

TEST_CASE("soft config validation") {
  CHECK_NOTHROW(validate_soft_config(SoftPlanConfig{}));
  CHECK_THROWS_AS(validate_soft_config(at(0.0)), ValidationError);
  CHECK_THROWS_AS(validate_soft_config(at(-1.0)), ValidationError);
  CHECK_THROWS_AS(validate_soft_config(at(std::numeric_limits<double>::infinity())), ValidationError);
  CHECK_THROWS_AS(validate_soft_config(at(0.1, 0.0)), ValidationError);
  SoftPlanConfig bad;
  bad.max_iters = 0;
  CHECK_THROWS_AS(validate_soft_config(bad), ValidationError);
}

TEST_CASE("soft operator reduces to the affine backup with one action") {
  Gen g(61);
  const auto mdp = testsupport::random_instance(g, 3, 1, 0.9);
  const Vector v = testsupport::random_vector(g, 3, -1, 1);
  const auto soft = soft_bellman_operator(true_view(mdp), 0.3, {v}).v;
  const auto hard = bellman_operator(true_view(mdp), {v}).v;
  CHECK((soft - hard).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("soft operator adds lambda ln 2 on a two-way tie") {
  const auto mdp = one_state(2, 0.4, 0.5);
  const auto tv = soft_bellman_operator(true_view(mdp), 0.2, {Vector::Constant(1, 1.0)}).v;
  CHECK(std::abs(tv(0) - (0.4 + 0.5 + 0.2 * std::log(2.0))) <= 1e-15);
}

TEST_CASE("soft operator sandwich: hard <= soft <= hard + lambda ln m") {
  Gen g(62);
  for (int trial = 0; trial < 200; ++trial) {
    const int m = 1 + trial % 4;
    const auto mdp = testsupport::random_instance(g, 3, m, 0.9);
    const Vector v = testsupport::random_vector(g, 3, -5, 5);
    for (double lambda : {1e-6, 1e-3, 0.1, 1.0}) {
      const auto soft = soft_bellman_operator(true_view(mdp), lambda, {v}).v;
      const auto hard = bellman_operator(true_view(mdp), {v}).v;
      CHECK(((soft - hard).array() >= -1e-15).all());
      CHECK(((soft - hard).array() <= lambda * std::log(m) + 1e-9).all());
    }
  }
}

TEST_CASE("soft operator stays finite at tiny temperatures") {
  Gen g(63);
  const auto mdp = testsupport::random_instance(g, 3, 3, 0.9);
  const Vector v = testsupport::random_vector(g, 3, -100, 100);
  CHECK(soft_bellman_operator(true_view(mdp), 1e-12, {v}).v.allFinite());
  CHECK_THROWS_AS(soft_bellman_operator(true_view(mdp), 0.0, {v}), ValidationError);
}

TEST_CASE("soft operator contracts with modulus beta") {
  Gen g(64);
  for (int trial = 0; trial < 300; ++trial) {
    const double beta = std::array<double, 3>{0.5, 0.9, 0.95}[static_cast<std::size_t>(trial % 3)];
    const auto mdp = testsupport::random_instance(g, 2 + trial % 4, 1 + trial % 3, beta);
    const Vector v1 = testsupport::random_vector(g, mdp.num_states(), -10, 10);
    const Vector v2 = testsupport::random_vector(g, mdp.num_states(), -10, 10);
    const double lambda = std::array<double, 3>{1e-3, 0.1, 2.0}[static_cast<std::size_t>(trial % 3)];
    const auto view = true_view(mdp);
    const double lhs = (soft_bellman_operator(view, lambda, {v1}).v -
                        soft_bellman_operator(view, lambda, {v2}).v).lpNorm<Eigen::Infinity>();
    CHECK(lhs <= beta * (v1 - v2).lpNorm<Eigen::Infinity>() * (1 + 1e-12));
  }
}

TEST_CASE("soft value iteration closed forms") {
  const auto single = one_state(1, 1.0, 0.5);
  CHECK(std::abs(soft_value_iteration(true_view(single), at(0.3)).value.v(0) - 2.0) <= 1e-10);

  const auto pair = one_state(2, 0.0, 0.5);
  const double lambda = 0.25;
  const auto sol = soft_value_iteration(true_view(pair), at(lambda));
  CHECK(std::abs(sol.value.v(0) - 2.0 * lambda * std::log(2.0)) <= 1e-10);
  // Q table is consistent with the value: q = r + beta v.
  CHECK(std::abs(sol.q.q(0, 0) - 0.5 * sol.value.v(0)) <= 1e-15);
}

TEST_CASE("soft value iteration matches the long-iteration oracle") {
  Gen g(65);
  for (int trial = 0; trial < 10; ++trial) {
    const auto mdp = testsupport::random_instance(g, 3, 2, 0.95);
    const auto sol = soft_value_iteration(true_view(mdp), at(0.1));
    const auto oracle = testsupport::soft_value_oracle(mdp, mdp.transition, 0.1L);
    for (int x = 0; x < 3; ++x) {
      CHECK(std::abs(sol.value.v(x) - static_cast<double>(oracle[static_cast<std::size_t>(x)])) <= 1e-9);
    }
  }
}

TEST_CASE("soft value iteration reports non-convergence") {
  Gen g(66);
  const auto mdp = testsupport::random_instance(g, 3, 2, 0.99);
  SoftPlanConfig cfg = at(0.1);
  cfg.max_iters = 5;
  CHECK_THROWS_AS(soft_value_iteration(true_view(mdp), cfg), ConvergenceError);
}

TEST_CASE("soft and hard values are within lambda ln m / (1 - beta)") {
  Gen g(67);
  for (int trial = 0; trial < 40; ++trial) {
    const int m = 2 + trial % 3;
    const auto mdp = testsupport::random_instance(g, 3, m, 0.9);
    const auto hard = value_iteration(true_view(mdp), 1e-11).v;
    for (double lambda : {1e-3, 0.1}) {
      const auto soft = soft_value_iteration(true_view(mdp), at(lambda, 1e-11)).value.v;
      CHECK((soft - hard).lpNorm<Eigen::Infinity>() <= lambda * std::log(m) / 0.1 + 1e-9);
      CHECK(((soft - hard).array() >= -1e-9).all());
    }
  }
}

TEST_CASE("softmax policy closed forms") {
  SoftQTable flat{Table::Constant(2, 3, 1.5)};
  const auto uni = softmax_policy(flat, 0.7);
  CHECK((uni.probs.array() - 1.0 / 3).abs().maxCoeff() <= 1e-15);

  const double lambda = 0.2;
  SoftQTable q{Table(1, 2)};
  q.q << lambda * std::log(9.0), 0.0;
  const auto pi = softmax_policy(q, lambda);
  CHECK(std::abs(pi.probs(0, 0) - 0.9) <= 1e-15);
  CHECK(std::abs(pi.probs(0, 1) - 0.1) <= 1e-15);
  CHECK_THROWS_AS(softmax_policy(q, 0.0), ValidationError);
}

TEST_CASE("softmax rows are normalized and strictly positive even when logits underflow") {
  Gen g(68);
  for (int trial = 0; trial < 100; ++trial) {
    SoftQTable q{Table(3, 4)};
    for (int x = 0; x < 3; ++x) {
      for (int a = 0; a < 4; ++a) q.q(x, a) = testsupport::random_vector(g, 1, -50, 50)(0);
    }
    const double lambda = trial % 2 ? 1e-6 : 5.0;
    const auto pi = softmax_policy(q, lambda);
    for (int x = 0; x < 3; ++x) {
      CHECK(std::abs(pi.probs.row(x).sum() - 1.0) <= 1e-12);
      CHECK(pi.probs.row(x).minCoeff() > 0.0);
    }
  }
}

TEST_CASE("cold softmax matches the hard greedy policy") {
  Gen g(69);
  int compared = 0;
  for (int trial = 0; trial < 40; ++trial) {
    const auto mdp = testsupport::random_instance(g, 3, 2, 0.9);
    const auto view = true_view(mdp);
    const auto V = value_iteration(view, 1e-11);
    const auto q = action_backups(view, V.v);
    bool unique = true;
    for (int x = 0; x < 3; ++x) unique = unique && std::abs(q(x, 0) - q(x, 1)) > 1e-3;
    if (!unique) continue;
    ++compared;
    const auto hard = best_response_policy(view);
    for (double lambda : {1e-5, 1e-6}) {
      const auto soft = soft_best_response(view, at(lambda)).policy;
      for (int x = 0; x < 3; ++x) {
        CHECK(0.5 * (soft.probs.row(x) - hard.probs.row(x)).cwiseAbs().sum() <= 1e-3);
      }
    }
  }
  CHECK(compared > 20);
}

TEST_CASE("benchmark: hot temperature is uniform, policy is continuous in the noise level") {
  const auto b = harness::benchmark3();
  SoftPlanConfig hot = at(1e4);
  hot.fp_tol = 1e-6;  // the value scale is ~1.4e5 here
  const auto pi = soft_best_response({b.mdp, b.family[0].kernel}, hot).policy;
  CHECK((pi.probs.array() - 0.5).abs().maxCoeff() <= 1e-3);

  for (double eps : {0.0, 0.05, 0.2, 0.45}) {
    const auto k1 = mixture_kernel(b.mdp.transition, eps);
    const auto k2 = mixture_kernel(b.mdp.transition, eps + 1e-6);
    const auto p1 = soft_best_response({b.mdp, k1}, at(0.1)).policy;
    const auto p2 = soft_best_response({b.mdp, k2}, at(0.1)).policy;
    for (int x = 0; x < 3; ++x) CHECK(0.5 * (p1.probs.row(x) - p2.probs.row(x)).cwiseAbs().sum() <= 1e-3);
  }
}

TEST_CASE("benchmark: reference-state policy runs from greedy to uniform across the sweep range") {
  // The soft Q values themselves depend on lambda, so the greedy-action
  // probability is not monotone in between; only the endpoints are pinned.
  const auto b = harness::benchmark3();
  const SubjectiveView view{b.mdp, b.family[0].kernel};
  const auto hard = best_response_policy(view);
  Eigen::Index greedy = 0;
  hard.probs.row(0).maxCoeff(&greedy);
  const auto solve = [&](double lambda) {
    const double tol = std::max(1e-10, 1e-13 * (1.5 + lambda * std::log(2.0)) / 0.05);
    return soft_best_response(view, at(lambda, tol)).policy.probs(0, greedy);
  };
  CHECK(solve(1e-4) >= 1 - 1e-6);
  CHECK(std::abs(solve(1e4) - 0.5) <= 1e-3);
  for (int i = -16; i <= 16; ++i) {
    const double p = solve(std::pow(10.0, i / 4.0));
    CHECK(p > 0.0);
    CHECK(p < 1.0 + 1e-15);
  }
}
