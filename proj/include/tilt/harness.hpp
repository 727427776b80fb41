#ifndef TILT_HARNESS_HPP
#define TILT_HARNESS_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "tilt/manifest.hpp"

namespace tilt {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitNumeric = 2;
inline constexpr int kExitProperty = 3;

// Seeded shuffle split; the three parts are disjoint and cover [0, n).
struct Split {
  std::vector<std::size_t> train, val, test;
};
Split split_indices(std::size_t n, double train_frac, double val_frac, std::uint64_t seed);

// Subcommand entry points.  Each writes its artifacts under out_dir and
// returns an exit code; unexpected conditions surface as exceptions that
// run_cli maps onto exit codes.
int cmd_gen(const ExperimentManifest& m);
int cmd_solve(const ExperimentManifest& m);
int cmd_sweep_t(const ExperimentManifest& m);
int cmd_risk(const ExperimentManifest& m);
int cmd_hier_solve(const ExperimentManifest& m);

// Full command-line front end (gen|solve|sweep-t|risk|hier-solve).
int run_cli(int argc, const char* const* argv);

}  // namespace tilt

#endif
