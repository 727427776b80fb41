#include "tilt/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "CLI11.hpp"
#include "json.hpp"
#include "tilt/hierarchy.hpp"
#include "tilt/kernels.hpp"
#include "tilt/risk.hpp"
#include "tilt/rng.hpp"
#include "tilt/tilt_core.hpp"

namespace tilt {

namespace {

using nlohmann::json;

constexpr const char* kVersion = "term 0.1.0";

// all CLI numeric output carries 9 significant digits
std::string fmt9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v + 0.0);  // normalizes -0
  return buf;
}

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + p.string());
  return out;
}

void write_run_json(const ExperimentManifest& m) {
  auto out = open_out(std::filesystem::path(m.out_dir) / "run.json");
  json j = json::parse(manifest_to_json_text(m));
  j["version"] = kVersion;
  out << j.dump(2) << '\n';
}

void write_trace_csv(const SolveTrace& trace, const std::filesystem::path& p) {
  auto out = open_out(p);
  out << "iter,t,objective,grad_norm,step\n";
  for (const auto& r : trace.rows)
    out << r.iter << ',' << fmt9(r.t) << ',' << fmt9(r.objective) << ',' << fmt9(r.grad_norm)
        << ',' << fmt9(r.step) << '\n';
}

void write_model_json(const ExperimentManifest& m, const std::vector<double>& theta,
                      const std::filesystem::path& p) {
  auto out = open_out(p);
  json j;
  j["family"] = m.loss.name();
  j["theta"] = theta;
  j["t"] = m.solver_cfg.t;
  if (m.solver.rfind("hier", 0) == 0) j["tau"] = m.hier.tau;
  out << j.dump(2) << '\n';
}

Dataset with_intercept(const Dataset& ds) {
  Dataset out;
  out.n = ds.n;
  out.d = ds.d + 1;
  out.targets = ds.targets;
  out.groups = ds.groups;
  out.annotators = ds.annotators;
  out.features.resize(out.n * out.d);
  for (std::size_t i = 0; i < ds.n; ++i) {
    std::copy_n(ds.features.data() + i * ds.d, ds.d, out.features.data() + i * out.d);
    out.features[i * out.d + ds.d] = 1.0;
  }
  return out;
}

// Train/val/test views of the manifest's data source.  Evaluation rows use
// clean targets where the scenario defines them: the annotator scenario
// evaluates against the base labels, and the regression-noise scenario
// drops corrupted rows from val/test.
struct RunData {
  Dataset train, val, test;
  bool classification{false};
  int rare_label{-1};  // minority train class for per-class metrics
};

Dataset genie_filter(const Dataset& ds, const ScenarioSpec& spec) {
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < ds.n; ++i) {
    const bool corrupted = spec.kind == ScenarioSpec::Kind::annotators
                               ? ds.annotators[i] >= spec.hammers
                               : ds.has_groups() && ds.groups[i] == 1;
    if (!corrupted) keep.push_back(i);
  }
  if (keep.empty()) throw std::invalid_argument("genie filter removed every training row");
  return ds.subset(keep);
}

RunData prepare_data(const ExperimentManifest& m) {
  Dataset ds;
  std::vector<double> clean_targets;
  bool drop_corrupted_eval = false;

  if (m.scenario) {
    const auto& spec = *m.scenario;
    if (spec.kind == ScenarioSpec::Kind::annotators) {
      const Dataset base = gen_imbalanced_logistic(spec);
      ds = gen_annotators(spec, base);
      clean_targets = base.targets;
    } else {
      ds = generate(spec);
      clean_targets = ds.targets;
      drop_corrupted_eval = spec.kind == ScenarioSpec::Kind::linear_regression_noise &&
                            spec.noise_fraction > 0.0;
    }
  } else if (!m.csv_path.empty()) {
    ds = load_csv(m.csv_path);
    clean_targets = ds.targets;
  } else {
    throw std::invalid_argument("manifest needs a scenario or a csv source");
  }

  const std::uint64_t split_seed = m.scenario ? m.scenario->seed : m.solver_cfg.seed;
  const Split split = split_indices(ds.n, m.split_train, m.split_val, split_seed);

  RunData rd;
  rd.classification = m.loss.is_classification();
  rd.train = ds.subset(split.train);
  if (m.genie) {
    if (!m.scenario || (m.scenario->kind != ScenarioSpec::Kind::annotators &&
                        m.scenario->kind != ScenarioSpec::Kind::linear_regression_noise &&
                        m.scenario->kind != ScenarioSpec::Kind::point_estimation))
      throw std::invalid_argument("genie mode needs a corruption-aware scenario");
    rd.train = genie_filter(rd.train, *m.scenario);
  }

  auto eval_subset = [&](const std::vector<std::size_t>& idx) {
    std::vector<std::size_t> keep;
    for (std::size_t i : idx)
      if (!drop_corrupted_eval || ds.groups[i] == 0) keep.push_back(i);
    Dataset part = ds.subset(keep);
    for (std::size_t k = 0; k < keep.size(); ++k) part.targets[k] = clean_targets[keep[k]];
    return part;
  };
  rd.val = eval_subset(split.val);
  rd.test = eval_subset(split.test);

  if (rd.classification) {
    std::size_t ones = 0;
    for (double y : rd.train.targets) ones += y == 1.0;
    rd.rare_label = 2 * ones <= rd.train.n ? 1 : 0;
  }

  if (m.intercept) {
    rd.train = with_intercept(rd.train);
    rd.val = with_intercept(rd.val);
    rd.test = with_intercept(rd.test);
  }
  return rd;
}

SolveTrace dispatch_solver(const ExperimentManifest& m, const Dataset& train) {
  std::vector<double> theta0(train.d, 0.0);
  if (m.solver == "batch") return batch_term_solve(train, m.loss, theta0, m.solver_cfg);
  if (m.solver == "sgd") return stochastic_term_solve(train, m.loss, theta0, m.solver_cfg);
  if (m.solver == "sgd2")
    return stochastic_term_solve_two_batch(train, m.loss, theta0, m.solver_cfg);
  const HierTilt h{m.solver_cfg.t, m.hier.tau};
  if (m.solver == "hier-batch")
    return batch_hierarchical_solve(train, m.loss, theta0, h, m.solver_cfg);
  if (m.solver == "hier-sgd")
    return stochastic_hierarchical_solve(train, m.loss, theta0, h, m.solver_cfg);
  throw std::invalid_argument("unknown solver: " + m.solver);
}

struct EvalResult {
  double metric{std::nan("")};       // rmse or accuracy
  double rare_acc{std::nan("")};     // classification only
};

EvalResult evaluate(const LossFamily& fam, const std::vector<double>& theta, const Dataset& ds,
                    bool classification, int rare_label) {
  EvalResult ev;
  if (ds.n == 0) return ev;
  const auto& ops = kernels::active();
  if (classification) {
    std::size_t correct = 0, rare_total = 0, rare_correct = 0;
    for (std::size_t i = 0; i < ds.n; ++i) {
      const double margin = ops.dot(theta.data(), ds.features.data() + i * ds.d, ds.d);
      const int label = static_cast<int>(ds.targets[i]);
      const int pred = margin > 0.0 ? 1 : 0;
      correct += pred == label;
      if (label == rare_label) {
        ++rare_total;
        rare_correct += pred == label;
      }
    }
    ev.metric = static_cast<double>(correct) / static_cast<double>(ds.n);
    if (rare_total > 0)
      ev.rare_acc = static_cast<double>(rare_correct) / static_cast<double>(rare_total);
  } else if (fam.kind == LossFamily::Kind::point) {
    double s = 0.0;
    for (std::size_t i = 0; i < ds.n; ++i)
      s += loss_value(fam, theta, ds.row(i), ds.targets[i]);
    ev.metric = std::sqrt(s / static_cast<double>(ds.n));
  } else {
    double s = 0.0;
    for (std::size_t i = 0; i < ds.n; ++i) {
      const double margin = ops.dot(theta.data(), ds.features.data() + i * ds.d, ds.d);
      const double r = margin - ds.targets[i];
      s += r * r;
    }
    ev.metric = std::sqrt(s / static_cast<double>(ds.n));
  }
  return ev;
}

double loss_variance(std::span<const double> f) {
  const double m = mean_loss(f);
  double s = 0.0;
  for (double v : f) s += (v - m) * (v - m);
  return s / static_cast<double>(f.size());
}

// 90th-percentile loss: the k-th largest with k = max(1, n/10)
double worst_k_loss(std::span<const double> f) {
  const std::size_t k = std::max<std::size_t>(1, f.size() / 10);
  return k_loss(f.size() - k + 1, f);
}

std::string csv_cell(double v) { return std::isnan(v) ? std::string() : fmt9(v); }

void write_metrics_csv(const ExperimentManifest& m, const RunData& rd,
                       const std::vector<double>& theta, const std::filesystem::path& p) {
  const auto train_ev = evaluate(m.loss, theta, rd.train, rd.classification, rd.rare_label);
  const auto val_ev = evaluate(m.loss, theta, rd.val, rd.classification, rd.rare_label);
  const auto test_ev = evaluate(m.loss, theta, rd.test, rd.classification, rd.rare_label);
  const auto f = batch_losses(m.loss, theta, rd.train);
  const auto w = tilt_weights(m.solver_cfg.t, f);

  auto out = open_out(p);
  // derived from the run configuration, not the output path, so reruns of
  // one manifest are byte-identical wherever they land
  const std::string run_id = m.solver + "-t" + fmt9(m.solver_cfg.t) + "-s" +
                             std::to_string(m.solver_cfg.seed);
  out << "run_id,solver,loss,t,tau,metric,train,val,test,"
         "rare_train,rare_val,rare_test,loss_variance,weight_entropy,worst_k_loss\n";
  out << run_id << ',' << m.solver << ','
      << m.loss.name() << ',' << fmt9(m.solver_cfg.t) << ',' << fmt9(m.hier.tau) << ','
      << (rd.classification ? "accuracy" : "rmse") << ',' << csv_cell(train_ev.metric) << ','
      << csv_cell(val_ev.metric) << ',' << csv_cell(test_ev.metric) << ','
      << csv_cell(train_ev.rare_acc) << ',' << csv_cell(val_ev.rare_acc) << ','
      << csv_cell(test_ev.rare_acc) << ',' << fmt9(loss_variance(f)) << ','
      << fmt9(weight_entropy(w)) << ',' << fmt9(worst_k_loss(f)) << '\n';
}

void write_group_weights(const ExperimentManifest& m, const Dataset& train,
                         const std::vector<double>& theta, const std::filesystem::path& p) {
  const auto gi = GroupIndex::build(train);
  const auto f = batch_losses(m.loss, theta, train);
  const auto w = hierarchical_weights({m.solver_cfg.t, m.hier.tau}, f, gi);
  auto out = open_out(p);
  out << "group,size,weight_share\n";
  for (std::size_t g = 0; g < gi.group_count(); ++g) {
    double share = 0.0;
    for (std::size_t idx : gi.members[g]) share += w[idx];
    out << g << ',' << gi.group_size(g) << ',' << fmt9(share) << '\n';
  }
}

std::vector<double> load_loss_column(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open losses csv: " + path);
  std::string line;
  if (!std::getline(in, line) || (line != "loss" && line != "loss\r"))
    throw std::invalid_argument("losses csv must have a single 'loss' column");
  std::vector<double> f;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    f.push_back(std::stod(line));
  }
  if (f.empty()) throw std::invalid_argument("losses csv has no rows");
  return f;
}

std::vector<double> risk_input_losses(const ExperimentManifest& m) {
  if (!m.losses_csv.empty()) return load_loss_column(m.losses_csv);
  if (m.model_json.empty())
    throw std::invalid_argument("risk needs losses_csv or a model plus data source");
  std::ifstream in(m.model_json, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open model: " + m.model_json);
  const json j = json::parse(in);
  const LossFamily fam = LossFamily::parse(j.at("family").get<std::string>());
  const std::vector<double> theta = j.at("theta").get<std::vector<double>>();

  Dataset ds;
  if (m.scenario)
    ds = generate(*m.scenario);
  else if (!m.csv_path.empty())
    ds = load_csv(m.csv_path);
  else
    throw std::invalid_argument("risk with a model needs a scenario or csv source");
  if (theta.size() == ds.d + 1) ds = with_intercept(ds);
  return batch_losses(fam, theta, ds);
}

void ensure_out_dir(const ExperimentManifest& m) {
  std::filesystem::create_directories(m.out_dir);
}

}  // namespace

Split split_indices(std::size_t n, double train_frac, double val_frac, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  Rng rng(seed ^ 0x5be5a945cb4ef4f3ull);
  rng.shuffle(idx);
  const auto n_train = static_cast<std::size_t>(std::floor(train_frac * static_cast<double>(n)));
  const auto n_val = static_cast<std::size_t>(std::floor(val_frac * static_cast<double>(n)));
  Split s;
  s.train.assign(idx.begin(), idx.begin() + n_train);
  s.val.assign(idx.begin() + n_train, idx.begin() + n_train + n_val);
  s.test.assign(idx.begin() + n_train + n_val, idx.end());

  // split bookkeeping: the three parts must partition [0, n)
  std::vector<bool> seen(n, false);
  for (const auto* part : {&s.train, &s.val, &s.test})
    for (std::size_t i : *part) {
      if (seen[i]) throw std::logic_error("split produced overlapping rows");
      seen[i] = true;
    }
  if (static_cast<std::size_t>(std::count(seen.begin(), seen.end(), true)) != n)
    throw std::logic_error("split dropped rows");
  return s;
}

int cmd_gen(const ExperimentManifest& m) {
  if (!m.scenario) throw std::invalid_argument("gen needs a scenario");
  ensure_out_dir(m);
  const Dataset ds = generate(*m.scenario);
  const Split split = split_indices(ds.n, m.split_train, m.split_val, m.scenario->seed);
  const std::filesystem::path base(m.out_dir);
  save_csv(ds.subset(split.train), (base / "train.csv").string());
  save_csv(ds.subset(split.val), (base / "val.csv").string());
  save_csv(ds.subset(split.test), (base / "test.csv").string());
  write_run_json(m);
  return kExitOk;
}

int cmd_solve(const ExperimentManifest& m) {
  ensure_out_dir(m);
  const RunData rd = prepare_data(m);
  const SolveTrace trace = dispatch_solver(m, rd.train);
  const std::filesystem::path base(m.out_dir);
  write_trace_csv(trace, base / "trace.csv");
  write_model_json(m, trace.theta, base / "model.json");
  write_metrics_csv(m, rd, trace.theta, base / "metrics.csv");
  if (m.solver.rfind("hier", 0) == 0)
    write_group_weights(m, rd.train, trace.theta, base / "group_weights.csv");
  write_run_json(m);
  return kExitOk;
}

// default sweep grid: the positive tuning set plus mirrored negatives
const std::vector<double> kDefaultTGrid = {-2.0, -1.0, -0.5, -0.1, 0.0,  0.1,   0.5,
                                           1.0,  2.0,  5.0,  10.0, 50.0, 100.0, 200.0};

int cmd_sweep_t(const ExperimentManifest& m) {
  ensure_out_dir(m);
  const RunData rd = prepare_data(m);

  std::vector<double> grid = m.t_grid.empty() ? kDefaultTGrid : m.t_grid;
  std::sort(grid.begin(), grid.end(), [](double a, double b) {
    return std::abs(a) == std::abs(b) ? a < b : std::abs(a) < std::abs(b);
  });

  struct SweepRow {
    double t, objective, grad_norm, train_metric, test_metric, variance, entropy;
    std::size_t iters;
    std::vector<double> theta;
  };
  std::vector<SweepRow> rows;

  // ascending |t| per sign with warm starts keeps the solution path connected
  std::vector<double> warm_pos(rd.train.d, 0.0), warm_neg(rd.train.d, 0.0);
  for (double t : grid) {
    ExperimentManifest step = m;
    step.solver_cfg.t = t;
    step.hier.t = t;

    SweepRow row{};
    row.t = t;
    std::vector<double> theta;
    if (m.sweep_eval_only) {
      theta.assign(rd.train.d, 0.0);
      row.iters = 0;
      row.grad_norm = std::nan("");
    } else {
      std::vector<double>& warm = t < 0.0 ? warm_neg : warm_pos;
      SolveTrace trace;
      if (step.solver == "batch")
        trace = batch_term_solve(rd.train, m.loss, warm, step.solver_cfg);
      else if (step.solver == "sgd")
        trace = stochastic_term_solve(rd.train, m.loss, warm, step.solver_cfg);
      else if (step.solver == "sgd2")
        trace = stochastic_term_solve_two_batch(rd.train, m.loss, warm, step.solver_cfg);
      else
        throw std::invalid_argument("sweep-t supports the flat solvers only");
      theta = trace.theta;
      warm = theta;
      row.iters = trace.rows.empty() ? 0 : trace.rows.back().iter + 1;
      row.grad_norm = trace.rows.empty() ? std::nan("") : trace.rows.back().grad_norm;
    }

    const auto f = batch_losses(m.loss, theta, rd.train);
    row.objective = tilted_value(t, f);
    row.train_metric = evaluate(m.loss, theta, rd.train, rd.classification, rd.rare_label).metric;
    row.test_metric = evaluate(m.loss, theta, rd.test, rd.classification, rd.rare_label).metric;
    row.variance = loss_variance(f);
    row.entropy = weight_entropy(tilt_weights(t, f));
    if (rd.train.d <= 4) row.theta = theta;
    rows.push_back(std::move(row));
  }

  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.t < b.t; });
  auto out = open_out(std::filesystem::path(m.out_dir) / "sweep.csv");
  out << "t,objective,grad_norm,iters,train_metric,test_metric,loss_variance,weight_entropy";
  const std::size_t d = rd.train.d <= 4 ? rd.train.d : 0;
  for (std::size_t j = 0; j < d; ++j) out << ",theta" << j;
  out << '\n';
  for (const auto& r : rows) {
    out << fmt9(r.t) << ',' << fmt9(r.objective) << ',' << csv_cell(r.grad_norm) << ','
        << r.iters << ',' << csv_cell(r.train_metric) << ',' << csv_cell(r.test_metric) << ','
        << fmt9(r.variance) << ',' << fmt9(r.entropy);
    for (std::size_t j = 0; j < d; ++j) out << ',' << fmt9(r.theta[j]);
    out << '\n';
  }
  write_run_json(m);
  return kExitOk;
}

int cmd_risk(const ExperimentManifest& m) {
  if (m.alphas.empty()) throw std::invalid_argument("risk needs a nonempty alpha list");
  ensure_out_dir(m);
  const std::vector<double> f = risk_input_losses(m);

  RiskQuery q;
  q.f_min_global = m.f_min_global;
  const RiskReport report = risk_report(f, m.alphas, q);

  const std::filesystem::path base(m.out_dir);
  {
    auto out = open_out(base / "risk.csv");
    out << "alpha,var,cvar,evar,tivar,ok_ordering\n";
    for (const auto& r : report.rows)
      out << fmt9(r.alpha) << ',' << fmt9(r.var) << ',' << fmt9(r.cvar) << ',' << fmt9(r.evar)
          << ',' << fmt9(r.tivar) << ',' << (r.ok_ordering ? 1 : 0) << '\n';
  }
  {
    json j = json::array();
    for (const auto& r : report.rows)
      j.push_back({{"alpha", r.alpha},
                   {"var", r.var},
                   {"cvar", r.cvar},
                   {"evar", r.evar},
                   {"tivar", r.tivar},
                   {"ok_ordering", r.ok_ordering}});
    auto out = open_out(base / "risk.json");
    out << j.dump(2) << '\n';
  }
  write_run_json(m);
  return report.all_ordered() ? kExitOk : kExitProperty;
}

int cmd_hier_solve(const ExperimentManifest& m) {
  if (m.solver.rfind("hier", 0) != 0)
    throw std::invalid_argument("hier-solve needs solver hier-batch or hier-sgd");
  return cmd_solve(m);
}

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"tilted empirical risk minimization toolkit"};
  app.require_subcommand(1);

  std::string manifest_path, out_override, loss_override, solver_override;
  double t_override = 0.0, tau_override = 0.0;
  std::uint64_t seed_override = 0;
  std::vector<double> alpha_override;
  bool has_t = false, has_tau = false, has_seed = false;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--manifest", manifest_path, "experiment manifest (JSON)");
    sub->add_option("--out", out_override, "output directory");
    sub->add_option("--loss", loss_override,
                    "loss family: squared|absolute|huber:<delta>|logistic|point");
    sub->add_option("--solver", solver_override, "batch|sgd|sgd2|hier-batch|hier-sgd");
    sub->add_option("--t", t_override, "tilt parameter")->each([&](const std::string&) {
      has_t = true;
    });
    sub->add_option("--tau", tau_override, "sample-level tilt")->each([&](const std::string&) {
      has_tau = true;
    });
    sub->add_option("--seed", seed_override, "solver seed")->each([&](const std::string&) {
      has_seed = true;
    });
    sub->add_option("--alpha", alpha_override, "risk confidence level(s)");
  };

  CLI::App* gen = app.add_subcommand("gen", "generate dataset splits");
  CLI::App* solve = app.add_subcommand("solve", "train with a configured solver");
  CLI::App* sweep = app.add_subcommand("sweep-t", "warm-started sweep over a tilt grid");
  CLI::App* risk = app.add_subcommand("risk", "VaR/CVaR/EVaR/TiVaR report");
  CLI::App* hier = app.add_subcommand("hier-solve", "train with hierarchical tilting");
  for (CLI::App* sub : {gen, solve, sweep, risk, hier}) add_common(sub);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }

  try {
    ExperimentManifest m =
        manifest_path.empty() ? ExperimentManifest{} : load_manifest(manifest_path);
    if (!out_override.empty()) m.out_dir = out_override;
    if (!loss_override.empty()) m.loss = LossFamily::parse(loss_override);
    if (!solver_override.empty()) m.solver = solver_override;
    if (has_t) {
      m.solver_cfg.t = t_override;
      m.hier.t = t_override;
    }
    if (has_tau) m.hier.tau = tau_override;
    if (has_seed) m.solver_cfg.seed = seed_override;
    if (!alpha_override.empty()) m.alphas = alpha_override;
    m.check();

    if (gen->parsed()) return cmd_gen(m);
    if (solve->parsed()) return cmd_solve(m);
    if (sweep->parsed()) return cmd_sweep_t(m);
    if (risk->parsed()) return cmd_risk(m);
    if (hier->parsed()) return cmd_hier_solve(m);
    return kExitUsage;
  } catch (const divergence_error& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return kExitNumeric;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitNumeric;
  }
}

}  // namespace tilt
