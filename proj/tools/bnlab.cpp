// bnlab: command-line front end for the berknash experiment harness.

#include <CLI11.hpp>

#include <cstdlib>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>

#include "berknash/error.hpp"
#include "berknash/harness/benchmark.hpp"
#include "berknash/harness/config.hpp"
#include "berknash/harness/experiment.hpp"
#include "berknash/learning.hpp"

namespace fs = std::filesystem;
using namespace berknash;
using namespace berknash::harness;

namespace {

constexpr const char* kOutputEnv = "BNLAB_OUTPUT_DIR";

constexpr int kExitAuditFailed = 20;
constexpr int kExitInternal = 70;

int exit_code(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::kValidation: return 10;
    case ErrorCategory::kReducibleChain: return 11;
    case ErrorCategory::kAbsoluteContinuity: return 12;
    case ErrorCategory::kConvergence: return 13;
    case ErrorCategory::kLpInfeasible: return 14;
    case ErrorCategory::kLpUnbounded: return 15;
    case ErrorCategory::kConfig: return 16;
    case ErrorCategory::kIo: return 17;
  }
  return kExitInternal;
}

// --out wins over the environment, which wins over the config file.
std::optional<fs::path> output_dir(const std::string& flag) {
  if (!flag.empty()) return fs::path(flag);
  if (const char* env = std::getenv(kOutputEnv); env != nullptr && *env != '\0') {
    return fs::path(env);
  }
  return std::nullopt;
}

int cmd_run(const std::string& config, const std::string& out, bool plot) {
  ExperimentConfig cfg = load_run_config(config);
  if (plot) cfg.emit_plot_script = true;
  const RunArtifacts art = run_experiment(cfg, output_dir(out));
  std::cout << experiment_name(cfg.kind) << " -> " << art.directory.string() << "\n";
  for (const auto& f : art.csv_files) std::cout << "  " << f << "\n";
  std::cout << "  manifest.json (" << std::setprecision(3) << art.wall_clock_seconds << " s)\n";
  return 0;
}

int cmd_benchmark3(bool dump) {
  const Benchmark b = benchmark3();
  nlohmann::json family = {{"kind", "mixture"},
                           {"epsilons", std::vector<double>(kBenchmarkEpsilons.begin(),
                                                            kBenchmarkEpsilons.end())}};
  if (dump) {
    std::cout << nlohmann::json{{"instance", instance_to_json(b.mdp)}, {"family", family}}.dump(2)
              << "\n";
    return 0;
  }
  SoftPlanConfig soft;
  soft.temperature = kBenchmarkTemperature;
  const auto sel = entropy_bn_select(b.mdp, b.family, soft);
  const double scale = default_loss_scale(b.mdp, b.family);
  std::cout << "benchmark3: " << b.mdp.num_states() << " states, " << b.mdp.num_actions()
            << " actions, discount " << b.mdp.discount << "\n";
  std::cout << "L_max = " << scale << "\n";
  for (int k = 0; k < b.family.size(); ++k) {
    std::cout << "  eps=" << b.family[k].label.value.at(0) << "  J=" << sel.objectives[k]
              << "  J/L_max=" << sel.objectives[k] / scale << (k == sel.best ? "  <- selected" : "")
              << "\n";
  }
  std::cout << "(use --dump for the full tables)\n";
  return 0;
}

int cmd_audit(const std::string& config, const std::string& out) {
  ExperimentConfig cfg = load_run_config(config);
  cfg.kind = ExperimentKind::kDualityAudit;
  const auto records = duality_audit(cfg.mdp, cfg.conjectures);
  bool ok = true;
  std::cout << std::scientific << std::setprecision(3);
  for (const auto& r : records) {
    std::cout << "model " << r.model << ": primal_gap=" << r.primal_gap
              << " dual_gap=" << r.dual_gap << " slackness=" << r.slackness
              << " flow=" << r.flow_residual << " greedy=" << (r.greedy ? "yes" : "no")
              << (r.pass ? "  ok" : "  FAIL") << "\n";
    ok = ok && r.pass;
  }
  if (const auto dir = output_dir(out)) {
    run_experiment(cfg, dir);
    std::cout << "wrote " << (*dir / "duality.csv").string() << "\n";
  }
  if (!ok) {
    std::cerr << "bnlab: error[audit-failed]: duality audit tolerances exceeded\n";
    return kExitAuditFailed;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Berk-Nash equilibria in misspecified MDPs: experiments and audits"};
  app.require_subcommand(1);

  std::string config;
  std::string out;
  bool plot = false;
  auto* run = app.add_subcommand("run", "run an experiment config (or re-run a manifest.json)");
  run->add_option("config", config, "config or manifest path")->required();
  run->add_option("--out", out, std::string("output directory (overrides ") + kOutputEnv + " and the config)");
  run->add_flag("--plot-script", plot, "also emit plot.py");

  bool dump = false;
  auto* bench = app.add_subcommand("benchmark3", "describe the builtin 3-state benchmark");
  bench->add_flag("--dump", dump, "print the frozen tables as JSON");

  std::string audit_config;
  std::string audit_out;
  auto* audit = app.add_subcommand("audit-duality", "check LP strong duality for every model");
  audit->add_option("config", audit_config, "config path")->required();
  audit->add_option("--out", audit_out, "also write duality.csv and a manifest here");

  std::string rundir;
  auto* report = app.add_subcommand("report", "summarize a run directory");
  report->add_option("rundir", rundir, "directory containing manifest.json")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*run) return cmd_run(config, out, plot);
    if (*bench) return cmd_benchmark3(dump);
    if (*audit) return cmd_audit(audit_config, audit_out);
    if (*report) {
      report_run(rundir, std::cout);
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "bnlab: error[" << category_name(e.category()) << "]: " << e.what() << "\n";
    return exit_code(e.category());
  } catch (const std::exception& e) {
    std::cerr << "bnlab: error[internal]: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitInternal;
}
