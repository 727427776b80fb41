#ifndef TILT_MANIFEST_HPP
#define TILT_MANIFEST_HPP

#include <optional>
#include <string>
#include <vector>

#include "tilt/dataset.hpp"
#include "tilt/hierarchy.hpp"
#include "tilt/losses.hpp"
#include "tilt/solver.hpp"

namespace tilt {

// A fully resolved experiment description: together with the code version
// it determines every output byte.  Parsed from JSON (unknown keys are
// rejected) and echoed back into <out>/run.json.
struct ExperimentManifest {
  std::optional<ScenarioSpec> scenario;
  std::string csv_path;         // data source when no scenario is given
  std::string losses_csv;       // risk command: precomputed loss column
  std::string model_json;       // risk command: model to score a dataset with

  LossFamily loss{};
  std::string solver{"batch"};  // batch|sgd|sgd2|hier-batch|hier-sgd
  SolverConfig solver_cfg{};
  HierTilt hier{};

  bool genie{false};            // drop known-corrupted rows before training
  bool intercept{false};        // append a constant-1 feature
  bool sweep_eval_only{false};  // sweep-t: evaluate at theta0, do not solve

  std::vector<double> alphas;
  std::vector<double> t_grid;
  double f_min_global{0.0};  // TiVaR anchor; 0 suits nonnegative losses
  double split_train{0.8};
  double split_val{0.1};
  std::string out_dir{"out"};

  void check() const;
};

ExperimentManifest manifest_from_json_text(const std::string& text);
ExperimentManifest load_manifest(const std::string& path);
std::string manifest_to_json_text(const ExperimentManifest& m);

}  // namespace tilt

#endif
