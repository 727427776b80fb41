#ifndef TILT_HIERARCHY_HPP
#define TILT_HIERARCHY_HPP

#include <span>
#include <vector>

#include "tilt/dataset.hpp"
#include "tilt/losses.hpp"
#include "tilt/rng.hpp"
#include "tilt/solver.hpp"
#include "tilt/tilt_core.hpp"

namespace tilt {

// Two-level tilt: t across groups, tau across the samples of each group.
// tau = 0 turns the group losses into plain group means; t = tau collapses
// the whole construction back to flat sample-level tilting.
struct HierTilt {
  double t{0.0};
  double tau{0.0};
};

// Per-group membership lists built from a dataset's group column.
struct GroupIndex {
  std::vector<std::vector<std::size_t>> members;

  std::size_t group_count() const { return members.size(); }
  std::size_t group_size(std::size_t g) const { return members[g].size(); }
  std::size_t total() const;

  // Requires groups to be present, contiguous, and nonempty.
  static GroupIndex build(const Dataset& ds);
};

// Per-group tilted losses R_g(tau) of a per-sample loss vector.
std::vector<double> group_tilted_losses(double tau, std::span<const double> f,
                                        const GroupIndex& gi);

// (1/t) log((1/N) sum_g |g| e^{t R_g(tau)}); size-weighted mean of the
// group values at t = 0.  Always within [min f, max f].
double hierarchical_value(const HierTilt& h, std::span<const double> f, const GroupIndex& gi);

// Per-sample gradient weights of the two-level objective, normalized to
// sum to 1; equals the flat tilt weights when t = tau.
std::vector<double> hierarchical_weights(const HierTilt& h, std::span<const double> f,
                                         const GroupIndex& gi);

// Convenience forms evaluating the losses of (family, theta) first.
std::vector<double> group_tilted_losses(double tau, const Dataset& ds, const LossFamily& fam,
                                        std::span<const double> theta);
double hierarchical_value(const HierTilt& h, const Dataset& ds, const LossFamily& fam,
                          std::span<const double> theta);
std::vector<double> hierarchical_weights(const HierTilt& h, const Dataset& ds,
                                         const LossFamily& fam, std::span<const double> theta);

// sum_i w_i grad f_i with the hierarchical weights.
std::vector<double> hierarchical_gradient(const HierTilt& h, std::span<const double> f,
                                          const RowMajor& grads, const GroupIndex& gi);

// Group draw of the stochastic solver: categorical with probabilities
// proportional to |g| e^{t * estimate_g}.
std::vector<double> group_sampling_probs(double t, std::span<const double> estimates,
                                         const GroupIndex& gi);
std::size_t sample_group(double t, std::span<const double> estimates, const GroupIndex& gi,
                         Rng& rng);

// Full-batch gradient descent on the two-level objective: group losses and
// gradients, group weights, weighted step.  cfg.anneal ramps t and tau
// together.
SolveTrace batch_hierarchical_solve(const Dataset& ds, const LossFamily& fam,
                                    std::vector<double> theta0, const HierTilt& h,
                                    const SolverConfig& cfg);

// Minibatch variant: draws a group from the tilted group distribution,
// then a minibatch within it; keeps one running tilted estimate per group
// (zero-initialized unless cfg.hier_init_full_pass).  Requires h.t != 0.
SolveTrace stochastic_hierarchical_solve(const Dataset& ds, const LossFamily& fam,
                                         std::vector<double> theta0, const HierTilt& h,
                                         const SolverConfig& cfg);

}  // namespace tilt

#endif
