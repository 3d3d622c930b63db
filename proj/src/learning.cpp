#include "berknash/learning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "berknash/error.hpp"

namespace berknash {

void validate_bandit_config(const BanditConfig& cfg) {
  if (!(cfg.learning_rate > 0.0) || !std::isfinite(cfg.learning_rate)) {
    throw ValidationError("learning_rate must be positive");
  }
  if (!(cfg.exploration > 0.0 && cfg.exploration < 1.0)) {
    throw ValidationError("exploration out of range: must lie in (0, 1)");
  }
  if (cfg.horizon < 1) throw ValidationError("horizon must be at least 1");
  if (cfg.estimator.kind == LossEstimator::Kind::kRollout) {
    if (cfg.estimator.horizon < 1) throw ValidationError("rollout horizon must be at least 1");
    if (!(cfg.estimator.smoothing > 0.0)) throw ValidationError("smoothing must be positive");
  }
  if (cfg.loss_scale && !(*cfg.loss_scale > 0.0)) {
    throw ValidationError("loss_scale must be positive");
  }
}

BanditState BanditState::initial(int num_arms) {
  if (num_arms < 1) throw ValidationError("bandit needs at least one arm");
  BanditState s;
  s.log_weights.assign(static_cast<std::size_t>(num_arms), 0.0);
  s.pulls.assign(static_cast<std::size_t>(num_arms), 0);
  s.mean_loss.assign(static_cast<std::size_t>(num_arms), 0.0);
  return s;
}

std::vector<double> BanditState::weights() const {
  const double top = *std::max_element(log_weights.begin(), log_weights.end());
  std::vector<double> w(log_weights.size());
  std::transform(log_weights.begin(), log_weights.end(), w.begin(),
                 [top](double lw) { return std::exp(lw - top); });
  return w;
}

std::vector<double> sampling_distribution(std::span<const double> weights, double gamma) {
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  const double k = static_cast<double>(weights.size());
  std::vector<double> p(weights.size());
  for (std::size_t i = 0; i < weights.size(); ++i) {
    p[i] = (1.0 - gamma) * weights[i] / total + gamma / k;
  }
  return p;
}

std::vector<double> sampling_distribution(const BanditState& state, double gamma) {
  return sampling_distribution(state.weights(), gamma);
}

std::vector<double> importance_weighted_losses(int num_arms, int arm, double loss, double prob) {
  std::vector<double> out(static_cast<std::size_t>(num_arms), 0.0);
  out[static_cast<std::size_t>(arm)] = loss / prob;
  return out;
}

void exp3_update(BanditState& state, int arm, double loss, double prob, double learning_rate) {
  if (!(prob > 0.0)) throw ValidationError("exp3_update: selection probability must be positive");
  const auto i = static_cast<std::size_t>(arm);
  state.log_weights[i] -= learning_rate * loss / prob;
  const double top = *std::max_element(state.log_weights.begin(), state.log_weights.end());
  for (double& lw : state.log_weights) lw -= top;
  const long before = state.pulls[i]++;
  state.mean_loss[i] = (static_cast<double>(before) * state.mean_loss[i] + loss) /
                       static_cast<double>(state.pulls[i]);
  state.cumulative_loss += loss;
  ++state.t;
}

double oracle_divergence(const MdpInstance& mdp, const Kernel& q, const Policy& pi) {
  return long_run_divergence(state_action_frequencies(mdp, pi), kl_cost_table(mdp, q));
}

namespace {

double normalize(double divergence, double loss_scale) {
  return std::clamp(divergence, 0.0, loss_scale) / loss_scale;
}

double rollout_divergence(const MdpInstance& mdp, const Kernel& q, const Policy& pi,
                          const LossEstimator& est, Rng& rng) {
  const int S = mdp.num_states();
  const int m = mdp.num_actions();
  Table counts = Table::Zero(S * m, S);
  const long burn_in = est.horizon / 10;
  int x = rng.categorical(std::span<const double>(mdp.initial.data(), static_cast<std::size_t>(S)));
  std::vector<double> row(static_cast<std::size_t>(std::max(S, m)));
  for (long step = 0; step < est.horizon; ++step) {
    for (int a = 0; a < m; ++a) row[static_cast<std::size_t>(a)] = pi.probs(x, a);
    const int a = rng.categorical(std::span<const double>(row.data(), static_cast<std::size_t>(m)));
    for (int y = 0; y < S; ++y) row[static_cast<std::size_t>(y)] = mdp.transition(x, a, y);
    const int next = rng.categorical(std::span<const double>(row.data(), static_cast<std::size_t>(S)));
    if (step >= burn_in) counts(mdp.transition.index(x, a), next) += 1.0;
    x = next;
  }
  const double total = counts.sum();
  if (total <= 0.0) return 0.0;

  const double s = est.smoothing;
  double divergence = 0.0;
  std::vector<double> p_hat(static_cast<std::size_t>(S));
  std::vector<double> q_row(static_cast<std::size_t>(S));
  for (int xs = 0; xs < S; ++xs) {
    for (int a = 0; a < m; ++a) {
      const int r = mdp.transition.index(xs, a);
      const double n = counts.row(r).sum();
      if (n <= 0.0) continue;
      bool q_has_zero = false;
      for (int y = 0; y < S; ++y) {
        const auto yi = static_cast<std::size_t>(y);
        p_hat[yi] = (counts(r, y) + s) / (n + S * s);
        q_row[yi] = q(xs, a, y);
        q_has_zero = q_has_zero || q_row[yi] <= 0.0;
      }
      if (q_has_zero) {
        for (double& v : q_row) v = (v + s) / (1.0 + S * s);
      }
      divergence += (n / total) * kl_divergence(p_hat, q_row);
    }
  }
  return divergence;
}

}  // namespace

double estimate_loss(const MdpInstance& mdp, const Kernel& q, const Policy& pi,
                     const LossEstimator& estimator, double loss_scale, Rng& rng) {
  if (!(loss_scale > 0.0)) throw ValidationError("loss_scale must be positive");
  if (estimator.kind == LossEstimator::Kind::kOracle) {
    return normalize(oracle_divergence(mdp, q, pi), loss_scale);
  }
  return normalize(rollout_divergence(mdp, q, pi, estimator, rng), loss_scale);
}

double default_loss_scale(const MdpInstance& mdp, const ConjectureSet& cs) {
  double top = 0.0;
  for (const auto& member : cs.members) {
    top = std::max(top, kl_cost_table(mdp, member.kernel).c.maxCoeff());
  }
  return top > 0.0 ? top : 1.0;
}

Exp3Run run_exp3(const MdpInstance& mdp, const ConjectureSet& cs, const BanditConfig& cfg,
                 const SoftPlanConfig& soft) {
  validate_instance(mdp);
  validate_conjecture_set(cs, mdp);
  validate_bandit_config(cfg);
  validate_soft_config(soft);
  const int K = cs.size();

  Exp3Run run;
  run.loss_scale = cfg.loss_scale ? *cfg.loss_scale : default_loss_scale(mdp, cs);

  // theta fixed => pi_{theta, lambda} fixed; solve each arm once.
  std::vector<Policy> policies;
  for (int k = 0; k < K; ++k) {
    const SubjectiveView view{mdp, cs[k].kernel};
    policies.push_back(soft_best_response(view, soft).policy);
    run.objectives.push_back(oracle_divergence(mdp, cs[k].kernel, policies.back()));
    run.oracle_losses.push_back(normalize(run.objectives.back(), run.loss_scale));
  }
  run.best_arm = static_cast<int>(
      std::min_element(run.oracle_losses.begin(), run.oracle_losses.end()) - run.oracle_losses.begin());
  const double best_loss = run.oracle_losses[static_cast<std::size_t>(run.best_arm)];

  BanditState state = BanditState::initial(K);
  run.trace.reserve(static_cast<std::size_t>(cfg.horizon));
  double regret = 0.0;
  for (int t = 1; t <= cfg.horizon; ++t) {
    const auto p = sampling_distribution(state, cfg.exploration);
    Rng pick = Rng::substream(cfg.seed, Stream::kArmSampling, static_cast<std::uint64_t>(t));
    const int arm = pick.categorical(p);
    double loss = run.oracle_losses[static_cast<std::size_t>(arm)];
    if (cfg.estimator.kind == LossEstimator::Kind::kRollout) {
      Rng roll = Rng::substream(cfg.seed, Stream::kRollout, static_cast<std::uint64_t>(t));
      loss = estimate_loss(mdp, cs[arm].kernel, policies[static_cast<std::size_t>(arm)],
                           cfg.estimator, run.loss_scale, roll);
    }
    const double prob = p[static_cast<std::size_t>(arm)];
    exp3_update(state, arm, loss, prob, cfg.learning_rate);
    regret += loss - best_loss;
    run.trace.push_back({t, arm, cs[arm].label.value, prob, loss,
                         state.cumulative_loss / static_cast<double>(t), regret, K});
  }
  run.pulls = state.pulls;
  for (long n : state.pulls) {
    run.frequencies.push_back(static_cast<double>(n) / static_cast<double>(cfg.horizon));
  }
  run.final_probabilities = sampling_distribution(state, cfg.exploration);
  run.average_loss = state.cumulative_loss / static_cast<double>(cfg.horizon);
  run.regret = regret;
  return run;
}

double Schedule::at(int t, int interval) const {
  return initial * std::pow(decay, static_cast<double>(t / interval));
}

void validate_zoom_config(const ZoomConfig& cfg) {
  if (cfg.interval < 1) throw ValidationError("zoom interval must be positive");
  for (const auto* s : {&cfg.alpha, &cfg.delta, &cfg.rho}) {
    if (!(s->initial > 0.0)) throw ValidationError("zoom schedules must be positive");
    if (!(s->decay > 0.0 && s->decay <= 1.0)) {
      throw ValidationError("zoom schedule decay must lie in (0, 1]");
    }
  }
  if (cfg.grid_size < 2) throw ValidationError("refinement grid size must be at least 2");
  if (!(cfg.uncertainty_constant > 0.0)) throw ValidationError("uncertainty constant must be positive");
  if (cfg.bounds.lower.empty() || cfg.bounds.lower.size() != cfg.bounds.upper.size()) {
    throw ValidationError("zoom bounds must be a nonempty box");
  }
  for (std::size_t i = 0; i < cfg.bounds.lower.size(); ++i) {
    if (!(cfg.bounds.lower[i] <= cfg.bounds.upper[i])) {
      throw ValidationError("zoom bounds: lower exceeds upper on axis " + std::to_string(i));
    }
  }
}

double uncertainty(long pulls, double constant) {
  return constant / std::sqrt(static_cast<double>(std::max(pulls, 1L)));
}

const char* prune_reason_name(PruneReason reason) {
  return reason == PruneReason::kSuboptimal ? "suboptimal" : "converged";
}

namespace {

int incumbent_of(std::span<const ArmStats> arms) {
  int best = 0;
  for (int k = 1; k < static_cast<int>(arms.size()); ++k) {
    if (arms[static_cast<std::size_t>(k)].mean_loss < arms[static_cast<std::size_t>(best)].mean_loss) best = k;
  }
  return best;
}

}  // namespace

PruneResult prune(std::span<const ArmStats> arms, double alpha, double delta,
                  double uncertainty_constant) {
  if (arms.empty()) throw ValidationError("prune needs at least one arm");
  PruneResult out;
  out.incumbent = incumbent_of(arms);
  out.best_loss = arms[static_cast<std::size_t>(out.incumbent)].mean_loss;
  for (int k = 0; k < static_cast<int>(arms.size()); ++k) {
    const auto& arm = arms[static_cast<std::size_t>(k)];
    if (k == out.incumbent) {
      out.kept.push_back(k);
    } else if (arm.mean_loss > out.best_loss + alpha) {
      out.pruned.emplace_back(k, PruneReason::kSuboptimal);
    } else if (uncertainty(arm.pulls, uncertainty_constant) < delta) {
      out.pruned.emplace_back(k, PruneReason::kConverged);
    } else {
      out.kept.push_back(k);
    }
  }
  return out;
}

std::vector<int> active_arms(std::span<const ArmStats> arms, double alpha, double delta,
                             double uncertainty_constant) {
  if (arms.empty()) return {};
  const double best = arms[static_cast<std::size_t>(incumbent_of(arms))].mean_loss;
  std::vector<int> out;
  for (int k = 0; k < static_cast<int>(arms.size()); ++k) {
    const auto& arm = arms[static_cast<std::size_t>(k)];
    if (arm.mean_loss <= best + alpha && uncertainty(arm.pulls, uncertainty_constant) >= delta) {
      out.push_back(k);
    }
  }
  return out;
}

namespace {

bool near_any(const std::vector<double>& p, std::span<const std::vector<double>> pool) {
  for (const auto& q : pool) {
    if (q.size() != p.size()) continue;
    bool same = true;
    for (std::size_t i = 0; i < p.size() && same; ++i) same = std::abs(p[i] - q[i]) <= 1e-12;
    if (same) return true;
  }
  return false;
}

}  // namespace

std::vector<std::pair<std::vector<double>, int>> refine(
    std::span<const std::vector<double>> centers, double rho, int grid_size,
    const ParameterBounds& bounds, std::span<const std::vector<double>> existing) {
  if (grid_size < 2) throw ValidationError("refinement grid size must be at least 2");
  std::vector<std::pair<std::vector<double>, int>> out;
  std::vector<std::vector<double>> seen(existing.begin(), existing.end());
  for (int c = 0; c < static_cast<int>(centers.size()); ++c) {
    const auto& center = centers[static_cast<std::size_t>(c)];
    const std::size_t dim = center.size();
    if (bounds.lower.size() != dim) throw ValidationError("refine: bounds dimension mismatch");
    std::vector<std::vector<double>> axes(dim);
    for (std::size_t i = 0; i < dim; ++i) {
      const double lo = std::max(center[i] - rho, bounds.lower[i]);
      const double hi = std::min(center[i] + rho, bounds.upper[i]);
      for (int j = 0; j < grid_size; ++j) {
        // Endpoints exact; interior points evenly spaced on the clipped span.
        const double v = j == grid_size - 1 ? hi : lo + (hi - lo) * j / (grid_size - 1);
        axes[i].push_back(std::clamp(v, bounds.lower[i], bounds.upper[i]));
      }
    }
    std::vector<std::size_t> idx(dim, 0);
    while (true) {
      std::vector<double> point(dim);
      for (std::size_t i = 0; i < dim; ++i) point[i] = axes[i][idx[i]];
      if (!near_any(point, seen)) {
        seen.push_back(point);
        out.emplace_back(std::move(point), c);
      }
      std::size_t axis = 0;
      while (axis < dim && ++idx[axis] == axes[axis].size()) idx[axis++] = 0;
      if (axis == dim) break;
    }
  }
  return out;
}

ZoomRun run_zoom_exp3(const MdpInstance& mdp, const FamilyGenerator& family,
                      const std::vector<std::vector<double>>& initial_parameters,
                      const BanditConfig& cfg, const SoftPlanConfig& soft,
                      const ZoomConfig& zoom) {
  validate_instance(mdp);
  validate_bandit_config(cfg);
  validate_soft_config(soft);
  validate_zoom_config(zoom);
  if (initial_parameters.empty()) throw ValidationError("initial conjecture set is empty");

  struct Arm {
    ZoomArm info;
    Kernel kernel;
    Policy policy;
    double oracle_divergence = 0.0;
  };
  auto make_arm = [&](int id, const std::vector<double>& parameter) {
    if (!zoom.bounds.contains(parameter)) {
      throw ValidationError("parameter outside the zoom bounds");
    }
    Arm arm;
    arm.info.id = id;
    arm.info.parameter = parameter;
    arm.kernel = family(parameter);
    validate_kernel(arm.kernel, "family member");
    const SubjectiveView view{mdp, arm.kernel};
    arm.policy = soft_best_response(view, soft).policy;
    if (cfg.estimator.kind == LossEstimator::Kind::kOracle) {
      arm.oracle_divergence = oracle_divergence(mdp, arm.kernel, arm.policy);
    }
    return arm;
  };

  std::vector<Arm> arms;
  int next_id = 0;
  for (const auto& p : initial_parameters) arms.push_back(make_arm(next_id++, p));

  ZoomRun run;
  if (cfg.loss_scale) {
    run.loss_scale = *cfg.loss_scale;
  } else {
    double top = 0.0;
    for (const auto& arm : arms) top = std::max(top, kl_cost_table(mdp, arm.kernel).c.maxCoeff());
    run.loss_scale = top > 0.0 ? top : 1.0;
  }

  double cumulative = 0.0;
  for (int t = 1; t <= cfg.horizon; ++t) {
    const int K = static_cast<int>(arms.size());
    std::vector<double> log_w(static_cast<std::size_t>(K));
    for (int k = 0; k < K; ++k) log_w[static_cast<std::size_t>(k)] = arms[static_cast<std::size_t>(k)].info.log_weight;
    const double top = *std::max_element(log_w.begin(), log_w.end());
    for (double& lw : log_w) lw = std::exp(lw - top);
    const auto p = sampling_distribution(log_w, cfg.exploration);

    Rng pick = Rng::substream(cfg.seed, Stream::kArmSampling, static_cast<std::uint64_t>(t));
    const int k = pick.categorical(p);
    Arm& arm = arms[static_cast<std::size_t>(k)];
    double loss = 0.0;
    if (cfg.estimator.kind == LossEstimator::Kind::kOracle) {
      loss = normalize(arm.oracle_divergence, run.loss_scale);
    } else {
      Rng roll = Rng::substream(cfg.seed, Stream::kRollout, static_cast<std::uint64_t>(t));
      loss = estimate_loss(mdp, arm.kernel, arm.policy, cfg.estimator, run.loss_scale, roll);
    }
    const double prob = p[static_cast<std::size_t>(k)];
    const long before = arm.info.pulls++;
    arm.info.mean_loss = (static_cast<double>(before) * arm.info.mean_loss + loss) /
                         static_cast<double>(arm.info.pulls);
    arm.info.log_weight -= cfg.learning_rate * loss / prob;
    const double shift = std::max_element(arms.begin(), arms.end(), [](const Arm& a, const Arm& b) {
                           return a.info.log_weight < b.info.log_weight;
                         })->info.log_weight;
    for (auto& a : arms) a.info.log_weight -= shift;
    cumulative += loss;
    run.trace.push_back({t, arm.info.id, arm.info.parameter, prob, loss,
                         cumulative / static_cast<double>(t), 0.0, K});

    if (t % zoom.interval != 0) continue;

    const double alpha = zoom.alpha.at(t, zoom.interval);
    const double delta = zoom.delta.at(t, zoom.interval);
    const double rho = zoom.rho.at(t, zoom.interval);
    std::vector<ArmStats> stats;
    for (const auto& a : arms) stats.push_back({a.info.pulls, a.info.mean_loss});
    const auto pruned = prune(stats, alpha, delta, zoom.uncertainty_constant);
    const auto active = active_arms(stats, alpha, delta, zoom.uncertainty_constant);

    ZoomEvent event;
    event.t = t;
    event.size_before = K;
    event.alpha = alpha;
    event.delta = delta;
    event.rho = rho;
    event.incumbent = arms[static_cast<std::size_t>(pruned.incumbent)].info.id;
    event.incumbent_parameter = arms[static_cast<std::size_t>(pruned.incumbent)].info.parameter;
    for (const auto& [idx, reason] : pruned.pruned) {
      (reason == PruneReason::kSuboptimal ? event.pruned_suboptimal : event.pruned_converged)++;
    }

    std::vector<std::vector<double>> centers;
    std::vector<double> parent_loss;
    for (int idx : active) {
      centers.push_back(arms[static_cast<std::size_t>(idx)].info.parameter);
      parent_loss.push_back(arms[static_cast<std::size_t>(idx)].info.mean_loss);
    }

    std::vector<Arm> next;
    for (int idx : pruned.kept) next.push_back(std::move(arms[static_cast<std::size_t>(idx)]));
    std::vector<std::vector<double>> existing;
    std::vector<double> kept_weights;
    for (const auto& a : next) {
      existing.push_back(a.info.parameter);
      kept_weights.push_back(std::exp(a.info.log_weight));
    }
    std::sort(kept_weights.begin(), kept_weights.end());
    const std::size_t mid = kept_weights.size() / 2;
    const double median = kept_weights.size() % 2 == 1
                              ? kept_weights[mid]
                              : 0.5 * (kept_weights[mid - 1] + kept_weights[mid]);

    for (auto& [point, center] : refine(centers, rho, zoom.grid_size, zoom.bounds, existing)) {
      Arm fresh = make_arm(next_id++, point);
      fresh.info.log_weight = std::log(median);
      fresh.info.mean_loss = parent_loss[static_cast<std::size_t>(center)];
      next.push_back(std::move(fresh));
      ++event.added;
    }

    arms = std::move(next);
    const double renorm = std::max_element(arms.begin(), arms.end(), [](const Arm& a, const Arm& b) {
                            return a.info.log_weight < b.info.log_weight;
                          })->info.log_weight;
    for (auto& a : arms) a.info.log_weight -= renorm;
    event.size_after = static_cast<int>(arms.size());
    event.incumbent_retained = std::any_of(arms.begin(), arms.end(), [&](const Arm& a) {
      return a.info.id == event.incumbent;
    });
    run.events.push_back(std::move(event));
  }
  for (const auto& a : arms) run.final_set.push_back(a.info);
  return run;
}

}  // namespace berknash
