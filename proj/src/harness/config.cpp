#include "berknash/harness/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "berknash/error.hpp"
#include "berknash/harness/benchmark.hpp"

namespace berknash::harness {

using nlohmann::json;

const char* experiment_name(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::kCaseStudy: return "case-study";
    case ExperimentKind::kLambdaSweep: return "lambda-sweep";
    case ExperimentKind::kZooming: return "zooming";
    case ExperimentKind::kEquilibriumReport: return "equilibrium-report";
    case ExperimentKind::kDualityAudit: return "duality-audit";
  }
  return "unknown";
}

namespace {

ExperimentKind parse_kind(const std::string& name) {
  for (auto k : {ExperimentKind::kCaseStudy, ExperimentKind::kLambdaSweep, ExperimentKind::kZooming,
                 ExperimentKind::kEquilibriumReport, ExperimentKind::kDualityAudit}) {
    if (name == experiment_name(k)) return k;
  }
  throw ConfigError("experiment: unknown kind \"" + name + "\"");
}

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

// `path` is empty for the top-level object.
void check_keys(const json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError((path.empty() ? "config" : path) + ": expected an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, _] : obj.items()) {
    if (!ok.count(key)) throw ConfigError(join(path, key) + ": unknown field");
  }
}

double get_number(const json& obj, const char* key, double fallback, const std::string& path) {
  if (!obj.contains(key) || obj.at(key).is_null()) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_number()) throw ConfigError(join(path, key) + ": expected a number");
  return v.get<double>();
}

long long get_integer(const json& obj, const char* key, long long fallback, const std::string& path) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_number_integer()) throw ConfigError(join(path, key) + ": expected an integer");
  return v.get<long long>();
}

std::vector<double> get_vector(const json& v, const std::string& path) {
  if (!v.is_array()) throw ConfigError(path + ": expected an array of numbers");
  std::vector<double> out;
  for (const auto& e : v) {
    if (!e.is_number()) throw ConfigError(path + ": expected an array of numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

Table get_table(const json& v, const std::string& path) {
  if (!v.is_array() || v.empty()) throw ConfigError(path + ": expected a nonempty 2-d array");
  const auto rows = static_cast<Eigen::Index>(v.size());
  const auto first = get_vector(v.at(0), path + "[0]");
  Table t(rows, static_cast<Eigen::Index>(first.size()));
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto row = get_vector(v.at(static_cast<std::size_t>(i)), path + "[" + std::to_string(i) + "]");
    if (static_cast<Eigen::Index>(row.size()) != t.cols()) {
      throw ConfigError(path + ": ragged rows");
    }
    for (Eigen::Index j = 0; j < t.cols(); ++j) t(i, j) = row[static_cast<std::size_t>(j)];
  }
  return t;
}

// Kernel tensor as [x][a][x'].
Kernel get_kernel(const json& v, const std::string& path) {
  if (!v.is_array() || v.empty()) throw ConfigError(path + ": expected a nonempty 3-d array");
  const int S = static_cast<int>(v.size());
  const Table first = get_table(v.at(0), path + "[0]");
  const int m = static_cast<int>(first.rows());
  if (first.cols() != S) throw ConfigError(path + ": successor dimension must equal state count");
  Kernel k(S, m);
  for (int x = 0; x < S; ++x) {
    const Table block = get_table(v.at(static_cast<std::size_t>(x)), path + "[" + std::to_string(x) + "]");
    if (block.rows() != m || block.cols() != S) throw ConfigError(path + ": inconsistent shape");
    for (int a = 0; a < m; ++a) k.row(x, a) = block.row(a);
  }
  return k;
}

json kernel_json(const Kernel& k) {
  json out = json::array();
  for (int x = 0; x < k.num_states(); ++x) {
    json block = json::array();
    for (int a = 0; a < k.num_actions(); ++a) {
      json row = json::array();
      for (int y = 0; y < k.num_states(); ++y) row.push_back(k(x, a, y));
      block.push_back(row);
    }
    out.push_back(block);
  }
  return out;
}

json schedule_json(const Schedule& s) { return {{"initial", s.initial}, {"decay", s.decay}}; }

Schedule get_schedule(const json& obj, const char* key, Schedule fallback, const std::string& path) {
  if (!obj.contains(key)) return fallback;
  const auto p = join(path, key);
  check_keys(obj.at(key), p, {"initial", "decay"});
  return {get_number(obj.at(key), "initial", fallback.initial, p),
          get_number(obj.at(key), "decay", fallback.decay, p)};
}

void line_and_column(const std::string& text, std::size_t byte, int& line, int& column) {
  line = 1;
  column = 1;
  for (std::size_t i = 0; i < text.size() && i + 1 < byte; ++i) {
    if (text[i] == '\n') {
      ++line;
      column = 1;
    } else {
      ++column;
    }
  }
}

void parse_instance(const json& root, ExperimentConfig& cfg) {
  const json inst = root.contains("instance") ? root.at("instance") : json("benchmark3");
  if (inst.is_string()) {
    const auto name = inst.get<std::string>();
    if (name != "benchmark3") throw ConfigError("instance: unknown builtin \"" + name + "\"");
    cfg.builtin = name;
    const double discount = get_number(root, "discount", kBenchmarkDiscount, "");
    cfg.mdp = benchmark3(discount).mdp;
    return;
  }
  if (root.contains("discount")) {
    throw ConfigError("discount: only valid with a builtin instance; set instance.discount instead");
  }
  check_keys(inst, "instance", {"discount", "transition", "reward", "initial"});
  for (const char* key : {"discount", "transition", "reward"}) {
    if (!inst.contains(key)) throw ConfigError(std::string("instance.") + key + ": required");
  }
  cfg.mdp.transition = get_kernel(inst.at("transition"), "instance.transition");
  cfg.mdp.reward = get_table(inst.at("reward"), "instance.reward");
  cfg.mdp.discount = get_number(inst, "discount", 0.0, "instance");
  const int S = cfg.mdp.num_states();
  if (inst.contains("initial")) {
    const auto init = get_vector(inst.at("initial"), "instance.initial");
    cfg.mdp.initial = Eigen::Map<const Vector>(init.data(), static_cast<Eigen::Index>(init.size()));
  } else {
    cfg.mdp.initial = Vector::Constant(S, 1.0 / S);
  }
}

void parse_family(const json& root, ExperimentConfig& cfg) {
  if (!root.contains("family")) {
    cfg.family.kind = FamilySpec::Kind::kMixture;
    cfg.family.epsilons.assign(kBenchmarkEpsilons.begin(), kBenchmarkEpsilons.end());
    return;
  }
  const auto& f = root.at("family");
  check_keys(f, "family", {"kind", "epsilons", "kernels"});
  const std::string kind = f.value("kind", std::string("mixture"));
  if (kind == "mixture") {
    cfg.family.kind = FamilySpec::Kind::kMixture;
    cfg.family.epsilons = f.contains("epsilons")
                              ? get_vector(f.at("epsilons"), "family.epsilons")
                              : std::vector<double>(kBenchmarkEpsilons.begin(), kBenchmarkEpsilons.end());
  } else if (kind == "tabular") {
    cfg.family.kind = FamilySpec::Kind::kTabular;
    if (!f.contains("kernels") || !f.at("kernels").is_array()) {
      throw ConfigError("family.kernels: required array for a tabular family");
    }
    for (std::size_t i = 0; i < f.at("kernels").size(); ++i) {
      cfg.family.kernels.push_back(
          get_kernel(f.at("kernels").at(i), "family.kernels[" + std::to_string(i) + "]"));
    }
  } else {
    throw ConfigError("family.kind: expected \"mixture\" or \"tabular\"");
  }
}

void parse_bandit(const json& root, ExperimentConfig& cfg) {
  if (!root.contains("bandit")) return;
  const auto& b = root.at("bandit");
  check_keys(b, "bandit", {"learning_rate", "exploration", "horizon", "loss", "loss_scale"});
  auto& out = cfg.bandit;
  out.learning_rate = get_number(b, "learning_rate", out.learning_rate, "bandit");
  out.exploration = get_number(b, "exploration", out.exploration, "bandit");
  out.horizon = static_cast<int>(get_integer(b, "horizon", out.horizon, "bandit"));
  if (b.contains("loss_scale") && !b.at("loss_scale").is_null()) {
    out.loss_scale = get_number(b, "loss_scale", 1.0, "bandit");
  }
  if (b.contains("loss")) {
    const auto& l = b.at("loss");
    check_keys(l, "bandit.loss", {"kind", "horizon", "smoothing"});
    const std::string kind = l.value("kind", std::string("oracle"));
    if (kind == "oracle") {
      out.estimator = LossEstimator::oracle();
    } else if (kind == "rollout") {
      out.estimator = LossEstimator::rollout(
          static_cast<long>(get_integer(l, "horizon", LossEstimator{}.horizon, "bandit.loss")),
          get_number(l, "smoothing", LossEstimator{}.smoothing, "bandit.loss"));
    } else {
      throw ConfigError("bandit.loss.kind: expected \"oracle\" or \"rollout\"");
    }
  }
}

void parse_zoom(const json& root, ExperimentConfig& cfg) {
  auto& z = cfg.zoom;
  int grid_points = 6;
  bool explicit_grid = false;
  if (root.contains("zoom")) {
    const auto& j = root.at("zoom");
    check_keys(j, "zoom", {"interval", "alpha", "delta", "rho", "grid_size", "uncertainty_constant",
                           "bounds", "initial_grid", "initial_grid_points"});
    z.interval = static_cast<int>(get_integer(j, "interval", z.interval, "zoom"));
    z.alpha = get_schedule(j, "alpha", z.alpha, "zoom");
    z.delta = get_schedule(j, "delta", z.delta, "zoom");
    z.rho = get_schedule(j, "rho", z.rho, "zoom");
    z.grid_size = static_cast<int>(get_integer(j, "grid_size", z.grid_size, "zoom"));
    z.uncertainty_constant = get_number(j, "uncertainty_constant", z.uncertainty_constant, "zoom");
    if (j.contains("bounds")) {
      const auto b = get_vector(j.at("bounds"), "zoom.bounds");
      if (b.size() != 2) throw ConfigError("zoom.bounds: expected [lower, upper]");
      z.bounds = ParameterBounds{{b[0]}, {b[1]}};
    }
    grid_points = static_cast<int>(get_integer(j, "initial_grid_points", grid_points, "zoom"));
    if (j.contains("initial_grid")) {
      cfg.zoom_initial_grid = get_vector(j.at("initial_grid"), "zoom.initial_grid");
      explicit_grid = true;
    }
  }
  if (!explicit_grid) {
    if (grid_points < 1) throw ConfigError("zoom.initial_grid_points: must be positive");
    const double lo = z.bounds.lower[0];
    const double hi = z.bounds.upper[0];
    cfg.zoom_initial_grid.clear();
    for (int i = 0; i < grid_points; ++i) {
      cfg.zoom_initial_grid.push_back(grid_points == 1 ? lo : lo + (hi - lo) * i / (grid_points - 1));
    }
  }
}

}  // namespace

ExperimentConfig parse_config(const std::string& text, const std::string& source) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    int line = 0;
    int column = 0;
    line_and_column(text, e.byte, line, column);
    throw ConfigError(source + ":" + std::to_string(line) + ":" + std::to_string(column) +
                      ": parse error: " + e.what());
  }
  check_keys(root, "", {"experiment", "seed", "output_dir", "instance", "discount", "family",
                              "soft", "bandit", "zoom", "sweep", "equilibrium", "emit_plot_script"});
  if (!root.contains("experiment") || !root.at("experiment").is_string()) {
    throw ConfigError("experiment: required string field");
  }

  ExperimentConfig cfg;
  cfg.kind = parse_kind(root.at("experiment").get<std::string>());
  const auto seed = get_integer(root, "seed", 42, "");
  if (seed < 0) throw ConfigError("seed: must be nonnegative");
  cfg.seed = static_cast<std::uint64_t>(seed);
  cfg.bandit.seed = cfg.seed;
  if (root.contains("output_dir")) {
    if (!root.at("output_dir").is_string()) throw ConfigError("output_dir: expected a string");
    cfg.output_dir = root.at("output_dir").get<std::string>();
  } else {
    cfg.output_dir = std::string("runs/") + experiment_name(cfg.kind);
  }
  if (root.contains("emit_plot_script")) {
    if (!root.at("emit_plot_script").is_boolean()) throw ConfigError("emit_plot_script: expected a boolean");
    cfg.emit_plot_script = root.at("emit_plot_script").get<bool>();
  }

  parse_instance(root, cfg);
  validate_instance(cfg.mdp);
  parse_family(root, cfg);
  if (cfg.family.kind == FamilySpec::Kind::kMixture) {
    cfg.conjectures = mixture_family(cfg.mdp, cfg.family.epsilons);
  } else {
    if (cfg.family.kernels.empty()) throw ConfigError("family.kernels: must be nonempty");
    for (std::size_t k = 0; k < cfg.family.kernels.size(); ++k) {
      cfg.conjectures.members.push_back({cfg.family.kernels[k], ParameterLabel{static_cast<int>(k), {}}});
    }
  }
  validate_conjecture_set(cfg.conjectures, cfg.mdp);

  cfg.soft.temperature = kBenchmarkTemperature;
  if (root.contains("soft")) {
    const auto& s = root.at("soft");
    check_keys(s, "soft", {"temperature", "fp_tol", "max_iters"});
    cfg.soft.temperature = get_number(s, "temperature", cfg.soft.temperature, "soft");
    cfg.soft.fp_tol = get_number(s, "fp_tol", cfg.soft.fp_tol, "soft");
    cfg.soft.max_iters = static_cast<long>(get_integer(s, "max_iters", cfg.soft.max_iters, "soft"));
  }
  validate_soft_config(cfg.soft);

  parse_bandit(root, cfg);
  validate_bandit_config(cfg.bandit);
  parse_zoom(root, cfg);
  validate_zoom_config(cfg.zoom);
  if (cfg.kind == ExperimentKind::kZooming && cfg.family.kind != FamilySpec::Kind::kMixture) {
    throw ConfigError("family: zooming requires a mixture family");
  }

  if (root.contains("sweep")) {
    const auto& s = root.at("sweep");
    check_keys(s, "sweep", {"log10_min", "log10_max", "points", "reference_state", "model"});
    cfg.sweep.log10_min = get_number(s, "log10_min", cfg.sweep.log10_min, "sweep");
    cfg.sweep.log10_max = get_number(s, "log10_max", cfg.sweep.log10_max, "sweep");
    cfg.sweep.points = static_cast<int>(get_integer(s, "points", cfg.sweep.points, "sweep"));
    cfg.sweep.reference_state = static_cast<int>(get_integer(s, "reference_state", 0, "sweep"));
    cfg.sweep.model = static_cast<int>(get_integer(s, "model", 0, "sweep"));
  }
  if (cfg.sweep.points < 2 || !(cfg.sweep.log10_min < cfg.sweep.log10_max)) {
    throw ValidationError("sweep: need points >= 2 and log10_min < log10_max");
  }
  if (cfg.sweep.reference_state < 0 || cfg.sweep.reference_state >= cfg.mdp.num_states()) {
    throw ValidationError("sweep.reference_state: out of range");
  }
  if (cfg.sweep.model < 0 || cfg.sweep.model >= cfg.conjectures.size()) {
    throw ValidationError("sweep.model: out of range");
  }

  if (root.contains("equilibrium")) {
    const auto& e = root.at("equilibrium");
    check_keys(e, "equilibrium", {"mode", "tolerance"});
    const std::string mode = e.value("mode", std::string("hard"));
    if (mode == "hard") {
      cfg.equilibrium_mode = EquilibriumMode::Kind::kHard;
    } else if (mode == "soft") {
      cfg.equilibrium_mode = EquilibriumMode::Kind::kSoft;
    } else {
      throw ConfigError("equilibrium.mode: expected \"hard\" or \"soft\"");
    }
    cfg.equilibrium_tol = get_number(e, "tolerance", cfg.equilibrium_tol, "equilibrium");
    if (!(cfg.equilibrium_tol > 0.0)) throw ValidationError("equilibrium.tolerance: must be positive");
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.string());
}

json instance_to_json(const MdpInstance& mdp) {
  json reward = json::array();
  for (int x = 0; x < mdp.num_states(); ++x) {
    json row = json::array();
    for (int a = 0; a < mdp.num_actions(); ++a) row.push_back(mdp.reward(x, a));
    reward.push_back(row);
  }
  json initial = json::array();
  for (int x = 0; x < mdp.num_states(); ++x) initial.push_back(mdp.initial(x));
  return {{"discount", mdp.discount},
          {"transition", kernel_json(mdp.transition)},
          {"reward", reward},
          {"initial", initial}};
}

json to_json(const ExperimentConfig& cfg) {
  json out;
  out["experiment"] = experiment_name(cfg.kind);
  out["seed"] = cfg.seed;
  out["output_dir"] = cfg.output_dir;
  out["emit_plot_script"] = cfg.emit_plot_script;
  if (cfg.builtin) {
    out["instance"] = *cfg.builtin;
    out["discount"] = cfg.mdp.discount;
  } else {
    out["instance"] = instance_to_json(cfg.mdp);
  }
  if (cfg.family.kind == FamilySpec::Kind::kMixture) {
    out["family"] = {{"kind", "mixture"}, {"epsilons", cfg.family.epsilons}};
  } else {
    json kernels = json::array();
    for (const auto& k : cfg.family.kernels) kernels.push_back(kernel_json(k));
    out["family"] = {{"kind", "tabular"}, {"kernels", kernels}};
  }
  out["soft"] = {{"temperature", cfg.soft.temperature},
                 {"fp_tol", cfg.soft.fp_tol},
                 {"max_iters", cfg.soft.max_iters}};
  json loss;
  if (cfg.bandit.estimator.kind == LossEstimator::Kind::kOracle) {
    loss = {{"kind", "oracle"}};
  } else {
    loss = {{"kind", "rollout"},
            {"horizon", cfg.bandit.estimator.horizon},
            {"smoothing", cfg.bandit.estimator.smoothing}};
  }
  out["bandit"] = {{"learning_rate", cfg.bandit.learning_rate},
                   {"exploration", cfg.bandit.exploration},
                   {"horizon", cfg.bandit.horizon},
                   {"loss", loss},
                   {"loss_scale", cfg.bandit.loss_scale ? json(*cfg.bandit.loss_scale) : json(nullptr)}};
  out["zoom"] = {{"interval", cfg.zoom.interval},
                 {"alpha", schedule_json(cfg.zoom.alpha)},
                 {"delta", schedule_json(cfg.zoom.delta)},
                 {"rho", schedule_json(cfg.zoom.rho)},
                 {"grid_size", cfg.zoom.grid_size},
                 {"uncertainty_constant", cfg.zoom.uncertainty_constant},
                 {"bounds", {cfg.zoom.bounds.lower[0], cfg.zoom.bounds.upper[0]}},
                 {"initial_grid", cfg.zoom_initial_grid}};
  out["sweep"] = {{"log10_min", cfg.sweep.log10_min},
                  {"log10_max", cfg.sweep.log10_max},
                  {"points", cfg.sweep.points},
                  {"reference_state", cfg.sweep.reference_state},
                  {"model", cfg.sweep.model}};
  out["equilibrium"] = {
      {"mode", cfg.equilibrium_mode == EquilibriumMode::Kind::kHard ? "hard" : "soft"},
      {"tolerance", cfg.equilibrium_tol}};
  return out;
}

}  // namespace berknash::harness
