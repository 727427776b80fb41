#include "tilt/manifest.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace tilt {

namespace {

using nlohmann::json;

void reject_unknown_keys(const json& j, const std::set<std::string>& allowed,
                         const std::string& where) {
  for (const auto& [key, value] : j.items())
    if (!allowed.contains(key))
      throw std::invalid_argument("unknown key '" + key + "' in " + where);
}

ScenarioSpec scenario_from_json(const json& j) {
  reject_unknown_keys(j, {"kind", "n", "dim", "noise_fraction", "imbalance_ratio", "hammers",
                          "spammers", "seed", "inlier_center", "outlier_center", "cluster_sd",
                          "sigma", "noise_mean_matched", "class_separation", "w_true"},
                      "scenario");
  ScenarioSpec s;
  s.kind = ScenarioSpec::parse_kind(j.at("kind").get<std::string>());
  s.n = j.value("n", s.n);
  s.dim = j.value("dim", s.dim);
  s.noise_fraction = j.value("noise_fraction", s.noise_fraction);
  s.imbalance_ratio = j.value("imbalance_ratio", s.imbalance_ratio);
  s.hammers = j.value("hammers", s.hammers);
  s.spammers = j.value("spammers", s.spammers);
  s.seed = j.value("seed", s.seed);
  if (j.contains("inlier_center")) s.inlier_center = j.at("inlier_center");
  if (j.contains("outlier_center")) s.outlier_center = j.at("outlier_center");
  s.cluster_sd = j.value("cluster_sd", s.cluster_sd);
  s.sigma = j.value("sigma", s.sigma);
  s.noise_mean_matched = j.value("noise_mean_matched", s.noise_mean_matched);
  s.class_separation = j.value("class_separation", s.class_separation);
  if (j.contains("w_true")) s.w_true = j.at("w_true").get<std::vector<double>>();
  return s;
}

json scenario_to_json(const ScenarioSpec& s) {
  json j;
  j["kind"] = s.kind_name();
  j["n"] = s.n;
  j["dim"] = s.dim;
  j["noise_fraction"] = s.noise_fraction;
  j["imbalance_ratio"] = s.imbalance_ratio;
  j["hammers"] = s.hammers;
  j["spammers"] = s.spammers;
  j["seed"] = s.seed;
  j["inlier_center"] = s.inlier_center;
  j["outlier_center"] = s.outlier_center;
  j["cluster_sd"] = s.cluster_sd;
  j["sigma"] = s.sigma;
  j["noise_mean_matched"] = s.noise_mean_matched;
  j["class_separation"] = s.class_separation;
  if (!s.w_true.empty()) j["w_true"] = s.w_true;
  return j;
}

SolverConfig::Schedule parse_schedule(const std::string& name) {
  if (name == "constant") return SolverConfig::Schedule::constant;
  if (name == "inverse-k") return SolverConfig::Schedule::inverse_k;
  if (name == "theorem") return SolverConfig::Schedule::theorem_scaled;
  throw std::invalid_argument("unknown schedule: " + name);
}

std::string schedule_name(SolverConfig::Schedule s) {
  switch (s) {
    case SolverConfig::Schedule::constant: return "constant";
    case SolverConfig::Schedule::inverse_k: return "inverse-k";
    case SolverConfig::Schedule::theorem_scaled: return "theorem";
  }
  return "?";
}

}  // namespace

void ExperimentManifest::check() const {
  if (solver != "batch" && solver != "sgd" && solver != "sgd2" && solver != "hier-batch" &&
      solver != "hier-sgd")
    throw std::invalid_argument("unknown solver: " + solver);
  if (!(split_train > 0.0) || split_train >= 1.0 || split_val < 0.0 ||
      split_train + split_val > 1.0)
    throw std::invalid_argument("invalid split fractions");
  for (double a : alphas)
    if (!(a > 0.0) || a > 1.0) throw std::invalid_argument("alpha out of (0, 1]");
  solver_cfg.check();
}

ExperimentManifest manifest_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("manifest is not valid JSON: ") + e.what());
  }
  reject_unknown_keys(
      j, {"scenario", "csv",      "losses_csv", "model",   "loss",        "solver",
          "t",        "tau",      "step_size",  "schedule", "c1",          "c2",
          "max_iters", "grad_tol", "batch_size", "lambda",  "anneal",      "anneal_iters",
          "seed",     "init_full_pass", "hier_init_full_pass", "trace_stride",
          "genie",    "intercept", "sweep_eval_only", "alphas", "t_grid",
          "f_min_global", "split_train", "split_val", "out"},
      "manifest");

  ExperimentManifest m;
  if (j.contains("scenario")) m.scenario = scenario_from_json(j.at("scenario"));
  m.csv_path = j.value("csv", m.csv_path);
  m.losses_csv = j.value("losses_csv", m.losses_csv);
  m.model_json = j.value("model", m.model_json);
  if (j.contains("loss")) m.loss = LossFamily::parse(j.at("loss").get<std::string>());
  m.solver = j.value("solver", m.solver);

  auto& c = m.solver_cfg;
  c.t = j.value("t", c.t);
  m.hier.t = c.t;
  m.hier.tau = j.value("tau", m.hier.tau);
  c.step_size = j.value("step_size", c.step_size);
  if (j.contains("schedule")) c.schedule = parse_schedule(j.at("schedule").get<std::string>());
  c.c1 = j.value("c1", c.c1);
  c.c2 = j.value("c2", c.c2);
  c.max_iters = j.value("max_iters", c.max_iters);
  c.grad_tol = j.value("grad_tol", c.grad_tol);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.lambda = j.value("lambda", c.lambda);
  if (j.contains("anneal")) {
    const std::string a = j.at("anneal").get<std::string>();
    if (a == "none")
      c.anneal = SolverConfig::Anneal::none;
    else if (a == "linear")
      c.anneal = SolverConfig::Anneal::linear;
    else
      throw std::invalid_argument("unknown anneal mode: " + a);
  }
  c.anneal_iters = j.value("anneal_iters", c.anneal_iters);
  c.seed = j.value("seed", c.seed);
  c.init_full_pass = j.value("init_full_pass", c.init_full_pass);
  c.hier_init_full_pass = j.value("hier_init_full_pass", c.hier_init_full_pass);
  c.trace_stride = j.value("trace_stride", c.trace_stride);

  m.genie = j.value("genie", m.genie);
  m.intercept = j.value("intercept", m.intercept);
  m.sweep_eval_only = j.value("sweep_eval_only", m.sweep_eval_only);
  if (j.contains("alphas")) m.alphas = j.at("alphas").get<std::vector<double>>();
  if (j.contains("t_grid")) m.t_grid = j.at("t_grid").get<std::vector<double>>();
  m.f_min_global = j.value("f_min_global", m.f_min_global);
  m.split_train = j.value("split_train", m.split_train);
  m.split_val = j.value("split_val", m.split_val);
  m.out_dir = j.value("out", m.out_dir);

  m.check();
  return m;
}

ExperimentManifest load_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open manifest: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return manifest_from_json_text(buf.str());
}

std::string manifest_to_json_text(const ExperimentManifest& m) {
  json j;
  if (m.scenario) j["scenario"] = scenario_to_json(*m.scenario);
  if (!m.csv_path.empty()) j["csv"] = m.csv_path;
  if (!m.losses_csv.empty()) j["losses_csv"] = m.losses_csv;
  if (!m.model_json.empty()) j["model"] = m.model_json;
  j["loss"] = m.loss.name();
  j["solver"] = m.solver;
  j["t"] = m.solver_cfg.t;
  j["tau"] = m.hier.tau;
  j["step_size"] = m.solver_cfg.step_size;
  j["schedule"] = schedule_name(m.solver_cfg.schedule);
  if (m.solver_cfg.schedule == SolverConfig::Schedule::theorem_scaled) {
    j["c1"] = m.solver_cfg.c1;
    j["c2"] = m.solver_cfg.c2;
  }
  j["max_iters"] = m.solver_cfg.max_iters;
  j["grad_tol"] = m.solver_cfg.grad_tol;
  j["batch_size"] = m.solver_cfg.batch_size;
  j["lambda"] = m.solver_cfg.lambda;
  j["anneal"] = m.solver_cfg.anneal == SolverConfig::Anneal::linear ? "linear" : "none";
  j["anneal_iters"] = m.solver_cfg.anneal_iters;
  j["seed"] = m.solver_cfg.seed;
  j["init_full_pass"] = m.solver_cfg.init_full_pass;
  j["hier_init_full_pass"] = m.solver_cfg.hier_init_full_pass;
  j["trace_stride"] = m.solver_cfg.trace_stride;
  j["genie"] = m.genie;
  j["intercept"] = m.intercept;
  j["sweep_eval_only"] = m.sweep_eval_only;
  if (!m.alphas.empty()) j["alphas"] = m.alphas;
  if (!m.t_grid.empty()) j["t_grid"] = m.t_grid;
  j["f_min_global"] = m.f_min_global;
  j["split_train"] = m.split_train;
  j["split_val"] = m.split_val;
  j["out"] = m.out_dir;
  return j.dump(2) + "\n";
}

}  // namespace tilt
