#include "berknash/harness/experiment.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>

#include "berknash/csv.hpp"
#include "berknash/error.hpp"
#include "berknash/lp.hpp"
#include "berknash/planning.hpp"

#ifndef BERKNASH_VERSION
#define BERKNASH_VERSION "0.0.0"
#endif

namespace berknash::harness {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr int kManifestVersion = 1;

std::string label_value(const ParameterLabel& label) {
  return label.value.empty() ? std::string() : csv::number(label.value.front());
}

class CsvFile {
 public:
  CsvFile(const fs::path& dir, const std::string& name, RunArtifacts& artifacts)
      : out_(dir / name, std::ios::binary) {
    if (!out_) throw IoError("cannot write " + (dir / name).string());
    artifacts.csv_files.push_back(name);
  }
  void row(const std::vector<std::string>& fields) { csv::write_row(out_, fields); }
  void close() {
    out_.close();
    if (!out_) throw IoError("write failed");
  }

 private:
  std::ofstream out_;
};

void run_case_study(const ExperimentConfig& cfg, const fs::path& dir, RunArtifacts& art) {
  const Exp3Run run = run_exp3(cfg.mdp, cfg.conjectures, cfg.bandit, cfg.soft);

  CsvFile freq(dir, "frequencies.csv", art);
  freq.row({"model", "parameter", "pulls", "frequency", "objective", "normalized_loss",
            "final_probability"});
  for (int k = 0; k < cfg.conjectures.size(); ++k) {
    const auto i = static_cast<std::size_t>(k);
    freq.row({csv::number(k), label_value(cfg.conjectures[k].label), csv::number(run.pulls[i]),
              csv::number(run.frequencies[i]), csv::number(run.objectives[i]),
              csv::number(run.oracle_losses[i]), csv::number(run.final_probabilities[i])});
  }
  freq.close();

  CsvFile trace(dir, "trace.csv", art);
  trace.row({"t", "arm", "parameter", "probability", "loss", "running_mean", "regret"});
  for (const auto& e : run.trace) {
    trace.row({csv::number(e.t), csv::number(e.arm),
               e.parameter.empty() ? std::string() : csv::number(e.parameter.front()),
               csv::number(e.probability), csv::number(e.loss), csv::number(e.running_mean),
               csv::number(e.regret)});
  }
  trace.close();

  const double T = cfg.bandit.horizon;
  const double K = cfg.conjectures.size();
  // Cumulative regret after round floor(T / 2).
  const std::size_t half = run.trace.size() / 2;
  const double half_regret = half == 0 ? 0.0 : run.trace[half - 1].regret;
  const double bound = 2.0 * std::sqrt(std::exp(1.0) - 1.0) * std::sqrt(T * K * std::log(K));
  CsvFile summary(dir, "summary.csv", art);
  summary.row({"metric", "value"});
  summary.row({"loss_scale", csv::number(run.loss_scale)});
  summary.row({"best_arm", csv::number(run.best_arm)});
  summary.row({"best_normalized_loss", csv::number(run.oracle_losses[static_cast<std::size_t>(run.best_arm)])});
  summary.row({"average_loss", csv::number(run.average_loss)});
  summary.row({"regret", csv::number(run.regret)});
  summary.row({"regret_half_horizon", csv::number(half_regret)});
  summary.row({"regret_bound", csv::number(bound)});
  summary.close();
}

void run_lambda_sweep(const ExperimentConfig& cfg, const fs::path& dir, RunArtifacts& art) {
  const auto points =
      lambda_sweep(cfg.mdp, cfg.conjectures[cfg.sweep.model].kernel, cfg.sweep, cfg.soft);
  CsvFile out(dir, "sweep.csv", art);
  out.row({"log10_lambda", "lambda", "state", "action", "pi", "soft_value", "entropy_free_value"});
  for (const auto& p : points) {
    for (int x = 0; x < cfg.mdp.num_states(); ++x) {
      for (int a = 0; a < cfg.mdp.num_actions(); ++a) {
        out.row({csv::number(p.log10_lambda), csv::number(p.lambda), csv::number(x), csv::number(a),
                 csv::number(p.pi.probs(x, a)), csv::number(p.soft_value(x)),
                 csv::number(p.entropy_free_value(x))});
      }
    }
  }
  out.close();
}

void run_zooming(const ExperimentConfig& cfg, const fs::path& dir, RunArtifacts& art) {
  const Kernel truth = cfg.mdp.transition;
  const FamilyGenerator family = [truth](const std::vector<double>& p) {
    return mixture_kernel(truth, p.at(0));
  };
  std::vector<std::vector<double>> initial;
  for (double e : cfg.zoom_initial_grid) initial.push_back({e});
  const ZoomRun run = run_zoom_exp3(cfg.mdp, family, initial, cfg.bandit, cfg.soft, cfg.zoom);

  CsvFile trace(dir, "zoom_trace.csv", art);
  trace.row({"t", "arm", "parameter", "probability", "loss", "running_mean", "set_size"});
  for (const auto& e : run.trace) {
    trace.row({csv::number(e.t), csv::number(e.arm), csv::number(e.parameter.at(0)),
               csv::number(e.probability), csv::number(e.loss), csv::number(e.running_mean),
               csv::number(e.set_size)});
  }
  trace.close();

  CsvFile events(dir, "zoom_events.csv", art);
  events.row({"t", "size_before", "pruned_suboptimal", "pruned_converged", "added", "size_after",
              "incumbent", "incumbent_parameter", "incumbent_retained", "alpha", "delta", "rho"});
  for (const auto& e : run.events) {
    events.row({csv::number(e.t), csv::number(e.size_before), csv::number(e.pruned_suboptimal),
                csv::number(e.pruned_converged), csv::number(e.added), csv::number(e.size_after),
                csv::number(e.incumbent), csv::number(e.incumbent_parameter.at(0)),
                e.incumbent_retained ? "1" : "0", csv::number(e.alpha), csv::number(e.delta),
                csv::number(e.rho)});
  }
  events.close();

  CsvFile final_set(dir, "final_set.csv", art);
  final_set.row({"arm", "parameter", "pulls", "mean_loss", "log_weight"});
  for (const auto& a : run.final_set) {
    final_set.row({csv::number(a.id), csv::number(a.parameter.at(0)), csv::number(a.pulls),
                   csv::number(a.mean_loss), csv::number(a.log_weight)});
  }
  final_set.close();
}

void run_equilibrium_report(const ExperimentConfig& cfg, const fs::path& dir, RunArtifacts& art) {
  const EquilibriumMode mode = cfg.equilibrium_mode == EquilibriumMode::Kind::kHard
                                   ? EquilibriumMode::hard()
                                   : EquilibriumMode::entropy(cfg.soft);
  const auto report = enumerate_equilibria(cfg.mdp, cfg.conjectures, mode, cfg.equilibrium_tol);
  {
    std::ofstream os(dir / "equilibria.csv", std::ios::binary);
    if (!os) throw IoError("cannot write equilibria.csv");
    write_report_csv(os, report, cfg.conjectures);
    art.csv_files.push_back("equilibria.csv");
  }
  std::ofstream os(dir / "summary.txt", std::ios::binary);
  if (!os) throw IoError("cannot write summary.txt");
  write_report_summary(os, report, cfg.conjectures);
}

void run_duality_audit(const ExperimentConfig& cfg, const fs::path& dir, RunArtifacts& art) {
  const auto records = duality_audit(cfg.mdp, cfg.conjectures);
  CsvFile out(dir, "duality.csv", art);
  out.row({"model", "parameter", "primal_objective", "dual_objective", "value_sum",
           "weighted_value", "primal_gap", "dual_gap", "slackness", "flow_residual", "greedy",
           "primal_pivots", "dual_pivots", "pass"});
  for (const auto& r : records) {
    out.row({csv::number(r.model), label_value(cfg.conjectures[r.model].label),
             csv::number(r.primal_objective), csv::number(r.dual_objective),
             csv::number(r.value_sum), csv::number(r.weighted_value), csv::number(r.primal_gap),
             csv::number(r.dual_gap), csv::number(r.slackness), csv::number(r.flow_residual),
             r.greedy ? "1" : "0", csv::number(r.primal_pivots), csv::number(r.dual_pivots),
             r.pass ? "1" : "0"});
  }
  out.close();
}

const char* plot_script(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::kCaseStudy:
      return R"py(import csv, sys
import matplotlib.pyplot as plt

def rows(name):
    with open(name, newline="") as f:
        return list(csv.DictReader(f))

freq = rows("frequencies.csv")
plt.figure()
plt.bar([r["parameter"] for r in freq], [float(r["frequency"]) for r in freq])
plt.xlabel("epsilon")
plt.ylabel("selection frequency")
plt.savefig("frequencies.png")

trace = rows("trace.csv")
t = [int(r["t"]) for r in trace]
plt.figure()
plt.plot(t, [float(r["loss"]) for r in trace], lw=0.5, label="loss")
plt.plot(t, [float(r["running_mean"]) for r in trace], label="running mean")
plt.xlabel("round")
plt.legend()
plt.savefig("trace.png")
)py";
    case ExperimentKind::kLambdaSweep:
      return R"py(import csv
import matplotlib.pyplot as plt

with open("sweep.csv", newline="") as f:
    data = list(csv.DictReader(f))
fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
for a in sorted({r["action"] for r in data}):
    sel = [r for r in data if r["state"] == "0" and r["action"] == a]
    ax1.plot([float(r["log10_lambda"]) for r in sel], [float(r["pi"]) for r in sel], label="a=" + a)
for x in sorted({r["state"] for r in data}):
    sel = [r for r in data if r["state"] == x and r["action"] == "0"]
    ax2.plot([float(r["log10_lambda"]) for r in sel], [float(r["soft_value"]) for r in sel], label="x=" + x)
ax1.set_xlabel("log10 lambda"); ax1.set_ylabel("pi(a|0)"); ax1.legend()
ax2.set_xlabel("log10 lambda"); ax2.set_ylabel("soft value"); ax2.legend()
fig.savefig("sweep.png")
)py";
    case ExperimentKind::kZooming:
      return R"py(import csv
import matplotlib.pyplot as plt

with open("zoom_trace.csv", newline="") as f:
    data = list(csv.DictReader(f))
t = [int(r["t"]) for r in data]
fig, (ax1, ax2) = plt.subplots(2, 1, sharex=True)
ax1.plot(t, [float(r["parameter"]) for r in data], ".", ms=2)
ax1.set_ylabel("selected epsilon")
ax2.plot(t, [float(r["loss"]) for r in data], lw=0.5)
ax2.set_ylabel("loss"); ax2.set_xlabel("round")
fig.savefig("zoom.png")
)py";
    case ExperimentKind::kEquilibriumReport:
    case ExperimentKind::kDualityAudit:
      break;
  }
  return R"py(import csv, glob
for name in sorted(glob.glob("*.csv")):
    with open(name, newline="") as f:
        print(name, sum(1 for _ in f) - 1, "rows")
)py";
}

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("missing " + path.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) rows.push_back(csv::parse_row(line));
  return rows;
}

}  // namespace

std::string library_version() { return BERKNASH_VERSION; }

double sweep_fp_tol(const MdpInstance& mdp, double lambda, double fp_tol) {
  const double scale = (mdp.reward.cwiseAbs().maxCoeff() + lambda * std::log(mdp.num_actions())) /
                       (1.0 - mdp.discount);
  return std::max(fp_tol, 1e-13 * scale);
}

std::vector<SweepPoint> lambda_sweep(const MdpInstance& mdp, const Kernel& kernel,
                                     const SweepConfig& sweep, const SoftPlanConfig& soft) {
  std::vector<SweepPoint> out;
  const SubjectiveView view{mdp, kernel};
  for (int i = 0; i < sweep.points; ++i) {
    SweepPoint p;
    p.log10_lambda =
        sweep.log10_min + (sweep.log10_max - sweep.log10_min) * i / (sweep.points - 1);
    p.lambda = std::pow(10.0, p.log10_lambda);
    SoftPlanConfig cfg = soft;
    cfg.temperature = p.lambda;
    cfg.fp_tol = sweep_fp_tol(mdp, p.lambda, soft.fp_tol);
    auto br = soft_best_response(view, cfg);
    p.pi = std::move(br.policy);
    p.soft_value = std::move(br.value.v);
    p.entropy_free_value = policy_value(mdp, kernel, p.pi).v;
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<DualityRecord> duality_audit(const MdpInstance& mdp, const ConjectureSet& cs) {
  std::vector<DualityRecord> out;
  for (int k = 0; k < cs.size(); ++k) {
    const SubjectiveView view{mdp, cs[k].kernel};
    DualityRecord rec;
    rec.model = k;
    const Policy br = best_response_policy(view);
    const Vector V = policy_value(mdp, cs[k].kernel, br).v;
    rec.value_sum = V.sum();
    rec.weighted_value = mdp.initial.dot(V);

    const LpSolution primal = simplex_solve(build_primal_lp(view));
    const LpSolution dual = simplex_solve(build_dual_lp(view));
    rec.primal_objective = primal.objective;
    rec.dual_objective = dual.objective;
    rec.primal_pivots = primal.pivots;
    rec.dual_pivots = dual.pivots;
    rec.primal_gap = std::abs(primal.objective - rec.value_sum);
    rec.dual_gap = std::abs(dual.objective - rec.weighted_value);

    const OccupationMeasure occ = occupation_from_solution(view, dual.x);
    rec.flow_residual = flow_residual(view, occ);
    const Table q = action_backups(view, primal.x);
    for (int x = 0; x < mdp.num_states(); ++x) {
      for (int a = 0; a < mdp.num_actions(); ++a) {
        if (occ.eta(x, a) > kOccupationSupport) {
          rec.slackness = std::max(rec.slackness, std::abs(primal.x(x) - q(x, a)));
        }
      }
    }

    const auto sets = greedy_sets(view, ValueFunction{V});
    const Policy induced = policy_from_occupation(occ);
    rec.greedy = true;
    for (int x = 0; x < mdp.num_states(); ++x) {
      if (occ.eta.row(x).sum() <= 1e-12) continue;
      for (int a = 0; a < mdp.num_actions(); ++a) {
        const auto& s = sets[static_cast<std::size_t>(x)];
        if (induced.probs(x, a) > kOccupationSupport && std::find(s.begin(), s.end(), a) == s.end()) {
          rec.greedy = false;
        }
      }
    }
    rec.pass = rec.primal_gap <= kPrimalGapTol && rec.dual_gap <= kDualGapTol &&
               rec.slackness <= kSlacknessTol && rec.greedy;
    out.push_back(rec);
  }
  return out;
}

RunArtifacts run_experiment(const ExperimentConfig& cfg,
                            const std::optional<fs::path>& output_override) {
  RunArtifacts art;
  art.directory = output_override ? *output_override : fs::path(cfg.output_dir);
  std::error_code ec;
  fs::create_directories(art.directory, ec);
  if (ec) throw IoError("cannot create " + art.directory.string() + ": " + ec.message());

  const std::string started = utc_timestamp();
  const auto t0 = std::chrono::steady_clock::now();
  try {
    switch (cfg.kind) {
      case ExperimentKind::kCaseStudy: run_case_study(cfg, art.directory, art); break;
      case ExperimentKind::kLambdaSweep: run_lambda_sweep(cfg, art.directory, art); break;
      case ExperimentKind::kZooming: run_zooming(cfg, art.directory, art); break;
      case ExperimentKind::kEquilibriumReport: run_equilibrium_report(cfg, art.directory, art); break;
      case ExperimentKind::kDualityAudit: run_duality_audit(cfg, art.directory, art); break;
    }
  } catch (const Error& e) {
    throw Error(e.category(), std::string(experiment_name(cfg.kind)) + ": " + e.what());
  }
  art.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  std::vector<std::string> extras;
  if (cfg.kind == ExperimentKind::kEquilibriumReport) extras.push_back("summary.txt");
  if (cfg.emit_plot_script) {
    std::ofstream py(art.directory / "plot.py", std::ios::binary);
    if (!py) throw IoError("cannot write plot.py");
    py << plot_script(cfg.kind);
    extras.push_back("plot.py");
  }

  json manifest;
  manifest["manifest_version"] = kManifestVersion;
  manifest["experiment"] = experiment_name(cfg.kind);
  manifest["seed"] = cfg.seed;
  manifest["config"] = to_json(cfg);
  manifest["files"] = art.csv_files;
  manifest["extra_files"] = extras;
  manifest["versions"] = {
      {"berknash", library_version()},
      {"compiler", __VERSION__},
      {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                    "." + std::to_string(EIGEN_MINOR_VERSION)},
      {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                            std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                            std::to_string(NLOHMANN_JSON_VERSION_PATCH)}};
  manifest["started_utc"] = started;
  manifest["wall_clock_seconds"] = art.wall_clock_seconds;

  art.manifest = art.directory / "manifest.json";
  std::ofstream os(art.manifest, std::ios::binary);
  if (!os) throw IoError("cannot write manifest.json");
  os << manifest.dump(2) << "\n";
  return art;
}

ExperimentConfig load_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  // Cheap sniff; parse_config reports syntax errors with positions.
  json probe = json::parse(text, nullptr, false);
  if (probe.is_object() && probe.contains("manifest_version")) {
    if (!probe.contains("config")) throw ConfigError(path.string() + ": manifest lacks config");
    return parse_config(probe.at("config").dump(), path.string() + "#config");
  }
  return parse_config(text, path.string());
}

void report_run(const fs::path& directory, std::ostream& os) {
  const json manifest = read_json(directory / "manifest.json");
  if (!manifest.contains("manifest_version") || !manifest.contains("files")) {
    throw ConfigError((directory / "manifest.json").string() + ": not a run manifest");
  }
  const std::string kind = manifest.value("experiment", std::string("?"));
  os << "experiment: " << kind << "\n";
  os << "seed: " << manifest.value("seed", 0ULL) << "\n";
  os << "started: " << manifest.value("started_utc", std::string("?")) << "\n";
  os << "wall clock: " << manifest.value("wall_clock_seconds", 0.0) << " s\n";
  std::map<std::string, std::vector<std::vector<std::string>>> tables;
  for (const auto& name : manifest.at("files")) {
    const auto file = name.get<std::string>();
    auto rows = read_csv(directory / file);
    os << "  " << file << ": " << (rows.empty() ? 0 : rows.size() - 1) << " rows\n";
    tables[file] = std::move(rows);
  }

  auto column = [](const std::vector<std::vector<std::string>>& t, const std::string& name) {
    if (t.empty()) return -1;
    const auto it = std::find(t[0].begin(), t[0].end(), name);
    return it == t[0].end() ? -1 : static_cast<int>(it - t[0].begin());
  };

  if (kind == "case-study" && tables.count("frequencies.csv")) {
    const auto& t = tables["frequencies.csv"];
    const int p = column(t, "parameter");
    const int f = column(t, "frequency");
    const int l = column(t, "normalized_loss");
    os << "selection frequencies:\n";
    for (std::size_t i = 1; i < t.size(); ++i) {
      os << "  eps=" << t[i][static_cast<std::size_t>(p)] << "  freq=" << t[i][static_cast<std::size_t>(f)]
         << "  loss=" << t[i][static_cast<std::size_t>(l)] << "\n";
    }
    if (tables.count("summary.csv")) {
      for (std::size_t i = 1; i < tables["summary.csv"].size(); ++i) {
        const auto& r = tables["summary.csv"][i];
        os << "  " << r.at(0) << " = " << r.at(1) << "\n";
      }
    }
  } else if (kind == "duality-audit" && tables.count("duality.csv")) {
    const auto& t = tables["duality.csv"];
    const int pass = column(t, "pass");
    const int dg = column(t, "dual_gap");
    int failures = 0;
    for (std::size_t i = 1; i < t.size(); ++i) {
      os << "  model " << t[i][0] << ": dual_gap=" << t[i][static_cast<std::size_t>(dg)]
         << (t[i][static_cast<std::size_t>(pass)] == "1" ? "  ok" : "  FAIL") << "\n";
      if (t[i][static_cast<std::size_t>(pass)] != "1") ++failures;
    }
    os << "audit: " << (failures == 0 ? "pass" : "fail") << "\n";
  } else if (kind == "zooming" && tables.count("final_set.csv")) {
    const auto& t = tables["final_set.csv"];
    os << "final set:";
    for (std::size_t i = 1; i < t.size(); ++i) os << " " << t[i].at(1);
    os << "\n";
  } else if (kind == "equilibrium-report") {
    std::ifstream in(directory / "summary.txt");
    if (in) os << in.rdbuf();
  }
}

}  // namespace berknash::harness
