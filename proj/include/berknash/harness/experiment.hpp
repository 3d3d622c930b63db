#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "berknash/harness/config.hpp"

namespace berknash::harness {

struct RunArtifacts {
  std::filesystem::path directory;
  std::vector<std::string> csv_files;  // relative to directory, in emission order
  std::filesystem::path manifest;
  double wall_clock_seconds = 0.0;
};

// One temperature of a lambda sweep, evaluated under a single subjective model.
struct SweepPoint {
  double log10_lambda = 0.0;
  double lambda = 0.0;
  Policy pi;
  Vector soft_value;          // fixed point of the soft Bellman operator
  Vector entropy_free_value;  // policy_value of pi under the same kernel, rewards only
};

// Effective soft-VI tolerance for temperature lambda: the requested fp_tol,
// raised to a few ulps of the value scale when the latter is larger.
double sweep_fp_tol(const MdpInstance& mdp, double lambda, double fp_tol);

std::vector<SweepPoint> lambda_sweep(const MdpInstance& mdp, const Kernel& kernel,
                                     const SweepConfig& sweep, const SoftPlanConfig& soft);

struct DualityRecord {
  int model = 0;
  double primal_objective = 0.0;
  double dual_objective = 0.0;
  double value_sum = 0.0;        // sum_x V(x)
  double weighted_value = 0.0;   // sum_x mu0(x) V(x)
  double primal_gap = 0.0;       // |primal - value_sum|
  double dual_gap = 0.0;         // |dual - weighted_value|
  double slackness = 0.0;        // worst primal-row slack where eta > 1e-8
  double flow_residual = 0.0;
  bool greedy = false;           // policy_from_occupation puts mass only on greedy actions
  int primal_pivots = 0;
  int dual_pivots = 0;
  bool pass = false;
};

inline constexpr double kPrimalGapTol = 1e-7;
inline constexpr double kDualGapTol = 1e-8;
inline constexpr double kSlacknessTol = 1e-8;
inline constexpr double kOccupationSupport = 1e-8;

std::vector<DualityRecord> duality_audit(const MdpInstance& mdp, const ConjectureSet& cs);

// Writes every CSV plus manifest.json (and plot.py if requested) into
// `output_override` when given, else cfg.output_dir. CSV bytes depend only on
// the config.
RunArtifacts run_experiment(const ExperimentConfig& cfg,
                            const std::optional<std::filesystem::path>& output_override = std::nullopt);

// Accepts either a config file or a manifest.json written by run_experiment.
ExperimentConfig load_run_config(const std::filesystem::path& path);

// Human-readable digest of a run directory. Throws IoError if the manifest
// or a listed CSV is missing.
void report_run(const std::filesystem::path& directory, std::ostream& os);

std::string library_version();

}  // namespace berknash::harness
