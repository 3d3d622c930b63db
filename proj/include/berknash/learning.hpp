#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "berknash/models.hpp"
#include "berknash/rng.hpp"
#include "berknash/soft_planning.hpp"

namespace berknash {

struct LossEstimator {
  enum class Kind { kOracle, kRollout };
  Kind kind = Kind::kOracle;
  long horizon = 100'000;   // rollout length H
  double smoothing = 1e-3;  // additive pseudo-count per successor

  static LossEstimator oracle() { return {}; }
  static LossEstimator rollout(long horizon, double smoothing = 1e-3) {
    return {Kind::kRollout, horizon, smoothing};
  }
};

struct BanditConfig {
  double learning_rate = 0.25;
  double exploration = 0.002;
  int horizon = 1500;
  LossEstimator estimator;
  // Normalizer L_max; when unset, the largest entrywise KL cost over the
  // initial conjecture set.
  std::optional<double> loss_scale;
  std::uint64_t seed = 42;
};

void validate_bandit_config(const BanditConfig& cfg);

struct TraceEntry {
  int t = 0;  // 1-based round
  int arm = 0;  // stable arm id
  std::vector<double> parameter;
  double probability = 0.0;  // p_t(arm)
  double loss = 0.0;         // normalized J_t
  double running_mean = 0.0;
  double regret = 0.0;  // cumulative, against the best fixed arm's oracle loss
  int set_size = 0;
};

// EXP3 state over a fixed arm set. Weights are kept in the log domain and
// shifted so the largest is 0 (i.e. divided by their max).
struct BanditState {
  std::vector<double> log_weights;
  int t = 0;
  std::vector<long> pulls;
  std::vector<double> mean_loss;
  double cumulative_loss = 0.0;

  static BanditState initial(int num_arms);
  int num_arms() const { return static_cast<int>(log_weights.size()); }
  std::vector<double> weights() const;
};

// p(k) = (1 - gamma) w(k) / sum_j w(j) + gamma / K.
std::vector<double> sampling_distribution(std::span<const double> weights, double gamma);
std::vector<double> sampling_distribution(const BanditState& state, double gamma);

// l(k) = loss / prob for k == arm, 0 otherwise.
std::vector<double> importance_weighted_losses(int num_arms, int arm, double loss, double prob);

// Multiplies w(arm) by exp(-lr * loss / prob), renormalizes by the max and
// records the pull in the counters / running means.
void exp3_update(BanditState& state, int arm, double loss, double prob, double learning_rate);

// D(theta | pi) under the true kernel, unnormalized.
double oracle_divergence(const MdpInstance& mdp, const Kernel& q, const Policy& pi);

// Normalized loss estimate in [0, 1]. Oracle: min(D, L_max) / L_max. Rollout:
// simulate H steps under P and pi (first H/10 discarded), smooth the
// empirical transitions, evaluate the plug-in divergence, clip and divide.
double estimate_loss(const MdpInstance& mdp, const Kernel& q, const Policy& pi,
                     const LossEstimator& estimator, double loss_scale, Rng& rng);

// Largest entrywise KL cost over a conjecture set (1 if all are zero).
double default_loss_scale(const MdpInstance& mdp, const ConjectureSet& cs);

struct Exp3Run {
  std::vector<TraceEntry> trace;
  std::vector<long> pulls;
  std::vector<double> frequencies;  // pulls / T
  std::vector<double> objectives;   // J_lambda(theta_k), unnormalized
  std::vector<double> oracle_losses;  // objectives / L_max, clipped to [0, 1]
  std::vector<double> final_probabilities;
  double loss_scale = 1.0;
  double average_loss = 0.0;
  double regret = 0.0;
  int best_arm = 0;
};

// Algorithm: EXP3 over a fixed conjecture set; each arm's softmax best
// response is computed once up front.
Exp3Run run_exp3(const MdpInstance& mdp, const ConjectureSet& cs, const BanditConfig& cfg,
                 const SoftPlanConfig& soft);

// value(t) = initial * decay^floor(t / interval).
struct Schedule {
  double initial = 1.0;
  double decay = 1.0;

  double at(int t, int interval) const;
};

struct ZoomConfig {
  int interval = 100;
  Schedule alpha{0.1, 0.8};
  Schedule delta{0.02, 1.0};
  Schedule rho{0.1, 0.5};
  int grid_size = 3;
  double uncertainty_constant = 1.0;
  ParameterBounds bounds{{0.0}, {0.5}};
};

void validate_zoom_config(const ZoomConfig& cfg);

struct ArmStats {
  long pulls = 0;
  double mean_loss = 0.0;
};

// U(k) = c / sqrt(max(N, 1)).
double uncertainty(long pulls, double constant);

enum class PruneReason { kSuboptimal, kConverged };
const char* prune_reason_name(PruneReason reason);

struct PruneResult {
  std::vector<int> kept;
  std::vector<std::pair<int, PruneReason>> pruned;
  int incumbent = 0;  // argmin mean loss, lowest position on ties
  double best_loss = 0.0;
};

// Drops arms with L > min L + alpha (suboptimal) or U < delta (converged).
// The incumbent is never dropped.
PruneResult prune(std::span<const ArmStats> arms, double alpha, double delta,
                  double uncertainty_constant);

// Arms with L <= min L + alpha and U >= delta.
std::vector<int> active_arms(std::span<const ArmStats> arms, double alpha, double delta,
                             double uncertainty_constant);

// g evenly spaced points per axis on [theta - rho, theta + rho] clipped to
// bounds, for every center; points within 1e-12 of `existing` or of an
// earlier new point are dropped. Returns (point, center position) pairs.
std::vector<std::pair<std::vector<double>, int>> refine(
    std::span<const std::vector<double>> centers, double rho, int grid_size,
    const ParameterBounds& bounds, std::span<const std::vector<double>> existing);

using FamilyGenerator = std::function<Kernel(const std::vector<double>&)>;

struct ZoomEvent {
  int t = 0;
  int size_before = 0;
  int pruned_suboptimal = 0;
  int pruned_converged = 0;
  int added = 0;
  int size_after = 0;
  int incumbent = 0;  // arm id
  std::vector<double> incumbent_parameter;
  bool incumbent_retained = false;
  double alpha = 0.0;
  double delta = 0.0;
  double rho = 0.0;
};

struct ZoomArm {
  int id = 0;
  std::vector<double> parameter;
  long pulls = 0;
  double mean_loss = 0.0;
  double log_weight = 0.0;
};

struct ZoomRun {
  std::vector<TraceEntry> trace;
  std::vector<ZoomEvent> events;
  std::vector<ZoomArm> final_set;
  double loss_scale = 1.0;
};

// Algorithm: adaptive EXP3 with conjecture-set zooming.
ZoomRun run_zoom_exp3(const MdpInstance& mdp, const FamilyGenerator& family,
                      const std::vector<std::vector<double>>& initial_parameters,
                      const BanditConfig& cfg, const SoftPlanConfig& soft,
                      const ZoomConfig& zoom);

}  // namespace berknash
