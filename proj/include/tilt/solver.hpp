#ifndef TILT_SOLVER_HPP
#define TILT_SOLVER_HPP

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "tilt/dataset.hpp"
#include "tilt/losses.hpp"

namespace tilt {

// Raised when an iterate blows past the divergence guard or produces a
// non-finite objective.
class divergence_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SolverConfig {
  double t{0.0};
  double step_size{0.1};

  enum class Schedule { constant, inverse_k, theorem_scaled };
  Schedule schedule{Schedule::constant};
  double c1{0.0}, c2{0.0};  // theorem-scaled constants, user supplied

  std::size_t max_iters{10000};
  double grad_tol{1e-8};

  // stochastic solvers
  std::size_t batch_size{32};
  double lambda{0.1};  // tilted-averaging rate
  std::uint64_t seed{0};
  bool init_full_pass{true};       // flat estimate init; false: first minibatch
  bool hier_init_full_pass{false}; // per-group estimates start at 0 unless set

  enum class Anneal { none, linear };
  Anneal anneal{Anneal::none};
  std::size_t anneal_iters{0};  // 0: max_iters / 2

  double divergence_factor{1e6};
  std::size_t trace_stride{1};  // record every k-th iteration

  void check() const;
};

struct TraceRow {
  std::size_t iter;
  double t;
  double objective;
  double grad_norm;
  double step;
};

struct SolveTrace {
  std::vector<TraceRow> rows;
  std::vector<double> theta;
  bool converged{false};
  double wall_seconds{0.0};  // never serialized; outputs stay reproducible
};

// Linear ramp factor in [0, 1]: 1 when annealing is off or the window has
// passed, iter/window during the ramp.
double anneal_fraction(const SolverConfig& cfg, std::size_t iter);

// t ramped linearly from 0 over the anneal window, then held at cfg.t.
double effective_t(const SolverConfig& cfg, std::size_t iter);

// 1 / (c1 + c2 t) for t > 0; the t-independent 1/c1 otherwise.
double theorem_step_size(const SolverConfig& cfg, double t);

// Step size for iteration k at tilt t under the configured schedule.
double scheduled_step(const SolverConfig& cfg, double t, std::size_t k);

// Full-batch gradient descent on the tilted objective: per iteration all
// losses, the tilted value, the exponential weights, and the weighted
// gradient step.
SolveTrace batch_term_solve(const Dataset& ds, const LossFamily& fam,
                            std::vector<double> theta0, const SolverConfig& cfg);

// Minibatch solver keeping a running tilted estimate of the objective,
// updated by two-term tilted averaging; weights are normalized against the
// estimate.  t = 0 degrades to plain minibatch SGD.
SolveTrace stochastic_term_solve(const Dataset& ds, const LossFamily& fam,
                                 std::vector<double> theta0, const SolverConfig& cfg);

// Variant drawing two independent minibatches: one refreshes the estimate,
// the other supplies the gradients.
SolveTrace stochastic_term_solve_two_batch(const Dataset& ds, const LossFamily& fam,
                                           std::vector<double> theta0,
                                           const SolverConfig& cfg);

}  // namespace tilt

#endif
