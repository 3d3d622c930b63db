#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "berknash/equilibrium.hpp"
#include "berknash/learning.hpp"
#include "berknash/models.hpp"
#include "berknash/soft_planning.hpp"

namespace berknash::harness {

enum class ExperimentKind { kCaseStudy, kLambdaSweep, kZooming, kEquilibriumReport, kDualityAudit };

const char* experiment_name(ExperimentKind kind);

struct FamilySpec {
  enum class Kind { kMixture, kTabular };
  Kind kind = Kind::kMixture;
  std::vector<double> epsilons;
  std::vector<Kernel> kernels;
};

struct SweepConfig {
  double log10_min = -4.0;
  double log10_max = 4.0;
  int points = 33;
  int reference_state = 0;
  int model = 0;
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::kCaseStudy;
  std::uint64_t seed = 42;
  std::string output_dir = "runs";
  std::optional<std::string> builtin;  // e.g. "benchmark3"; unset for inline tables
  MdpInstance mdp;
  FamilySpec family;
  ConjectureSet conjectures;
  SoftPlanConfig soft;
  BanditConfig bandit;
  ZoomConfig zoom;
  std::vector<double> zoom_initial_grid;
  SweepConfig sweep;
  EquilibriumMode::Kind equilibrium_mode = EquilibriumMode::Kind::kHard;
  double equilibrium_tol = kDefaultFeasibilityTol;
  bool emit_plot_script = false;
};

// Parses and validates; every omitted field takes its documented default.
// Throws ConfigError (with line/column for syntax errors, field path for
// schema errors) or ValidationError from the module validators.
ExperimentConfig parse_config(const std::string& text, const std::string& source = "<config>");
ExperimentConfig load_config(const std::filesystem::path& path);

// Canonical, fully-defaulted echo. parse_config(to_json(cfg).dump()) == cfg.
nlohmann::json to_json(const ExperimentConfig& cfg);

nlohmann::json instance_to_json(const MdpInstance& mdp);

}  // namespace berknash::harness
