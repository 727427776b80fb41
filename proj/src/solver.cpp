#include "tilt/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

#include "tilt/kernels.hpp"
#include "tilt/rng.hpp"
#include "tilt/tilt_core.hpp"

namespace tilt {

namespace {

using Clock = std::chrono::steady_clock;

// losses (and, for linear families, margins) of theta over the rows named
// by ids; ids == nullptr means all of ds in order
struct BatchEval {
  std::vector<double> losses;
  std::vector<double> margins;
};

BatchEval eval_batch(const LossFamily& fam, std::span<const double> theta, const Dataset& ds,
                     const std::size_t* ids, std::size_t count) {
  const auto& ops = kernels::active();
  BatchEval ev;
  ev.losses.resize(count);
  if (fam.is_linear()) {
    ev.margins.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t r = ids ? ids[i] : i;
      const double m = ops.dot(theta.data(), ds.features.data() + r * ds.d, ds.d);
      ev.margins[i] = m;
      ev.losses[i] = margin_loss(fam, m, ds.targets[r]);
    }
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t r = ids ? ids[i] : i;
      ev.losses[i] = loss_value(fam, theta, ds.row(r), ds.targets[r]);
    }
  }
  return ev;
}

// g += (1/scale) sum_i w[i] grad f_i(theta)
void add_weighted_grads(const LossFamily& fam, std::span<const double> theta, const Dataset& ds,
                        const std::size_t* ids, std::size_t count, const BatchEval& ev,
                        std::span<const double> w, double scale, std::span<double> g) {
  const auto& ops = kernels::active();
  if (fam.is_linear()) {
    std::vector<double> coef(count);
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t r = ids ? ids[i] : i;
      coef[i] = w[i] * margin_derivative(fam, ev.margins[i], ds.targets[r]) / scale;
    }
    if (ids == nullptr) {
      ops.weighted_row_sum(ds.features.data(), coef.data(), count, ds.d, g.data());
    } else {
      for (std::size_t i = 0; i < count; ++i)
        ops.axpy(coef[i], ds.features.data() + ids[i] * ds.d, g.data(), ds.d);
    }
  } else {
    // point loss: grad f_i = 2 (theta - x_i)
    double wsum = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t r = ids ? ids[i] : i;
      ops.axpy(-2.0 * w[i] / scale, ds.features.data() + r * ds.d, g.data(), ds.d);
      wsum += w[i];
    }
    ops.axpy(2.0 * wsum / scale, theta.data(), g.data(), ds.d);
  }
}

void unnormalized_tilt_weights(double t, std::span<const double> f, double ref,
                               std::vector<double>& w) {
  w.resize(f.size());
  if (t == 0.0) {
    std::fill(w.begin(), w.end(), 1.0);
    return;
  }
  kernels::active().exp_shift_store(f.data(), f.size(), t, t * ref, w.data());
}

void check_inputs(const Dataset& ds, std::span<const double> theta0,
                  const SolverConfig& cfg) {
  cfg.check();
  if (ds.n == 0) throw std::invalid_argument("dataset is empty");
  if (theta0.size() != ds.d) throw std::invalid_argument("theta0 dimension mismatch");
  for (double v : theta0)
    if (!std::isfinite(v)) throw std::invalid_argument("theta0 has non-finite entries");
}

struct DivergenceGuard {
  double reference{0.0};
  bool armed{false};
  double factor;

  explicit DivergenceGuard(double f) : factor(f) {}

  void observe(double objective, std::size_t iter) {
    if (!std::isfinite(objective))
      throw divergence_error("objective became non-finite at iteration " + std::to_string(iter));
    if (!armed) {
      reference = objective;
      armed = true;
      return;
    }
    if (objective > reference + factor * std::max(1.0, std::abs(reference)))
      throw divergence_error("objective diverged at iteration " + std::to_string(iter));
  }
};

// two-term log-sum-exp tilted average: (1/t) log((1-l) e^{t a} + l e^{t b})
double tilted_average(double t, double a, double b, double lambda) {
  if (lambda == 1.0) return b;
  if (t == 0.0) return (1.0 - lambda) * a + lambda * b;
  const double xa = std::log1p(-lambda) + t * a;
  const double xb = std::log(lambda) + t * b;
  const double hi = std::max(xa, xb);
  return (hi + std::log1p(std::exp(std::min(xa, xb) - hi))) / t;
}

enum class BatchMode { one, two };

SolveTrace stochastic_impl(const Dataset& ds, const LossFamily& fam, std::vector<double> theta,
                           const SolverConfig& cfg, BatchMode mode) {
  check_inputs(ds, theta, cfg);
  if (cfg.batch_size > ds.n) throw std::invalid_argument("batch_size exceeds dataset size");
  const auto t0 = Clock::now();
  const auto& ops = kernels::active();
  const std::size_t b = cfg.batch_size;
  Rng rng(cfg.seed);

  SolveTrace trace;
  DivergenceGuard guard(cfg.divergence_factor);

  double estimate;
  if (cfg.init_full_pass) {
    const auto ev = eval_batch(fam, theta, ds, nullptr, ds.n);
    estimate = tilted_value(effective_t(cfg, 0), ev.losses);
  } else {
    const auto ids = rng.sample_indices(ds.n, b);
    const auto ev = eval_batch(fam, theta, ds, ids.data(), b);
    estimate = tilted_value(effective_t(cfg, 0), ev.losses);
  }

  std::vector<double> w, g(theta.size());
  bool converged = false;
  for (std::size_t k = 0; k < cfg.max_iters && !converged; ++k) {
    const double t = effective_t(cfg, k);

    std::vector<std::size_t> grad_ids =
        b == ds.n ? std::vector<std::size_t>{} : rng.sample_indices(ds.n, b);
    const std::size_t* gids = grad_ids.empty() ? nullptr : grad_ids.data();
    auto grad_ev = eval_batch(fam, theta, ds, gids, b);

    if (mode == BatchMode::one) {
      estimate = tilted_average(t, estimate, tilted_value(t, grad_ev.losses), cfg.lambda);
    } else {
      std::vector<std::size_t> est_ids =
          b == ds.n ? std::vector<std::size_t>{} : rng.sample_indices(ds.n, b);
      const std::size_t* eids = est_ids.empty() ? nullptr : est_ids.data();
      const auto est_ev = eval_batch(fam, theta, ds, eids, b);
      estimate = tilted_average(t, estimate, tilted_value(t, est_ev.losses), cfg.lambda);
    }
    if (!std::isfinite(estimate))
      throw divergence_error("objective estimate became non-finite at iteration " +
                             std::to_string(k));

    unnormalized_tilt_weights(t, grad_ev.losses, estimate, w);
    std::fill(g.begin(), g.end(), 0.0);
    add_weighted_grads(fam, theta, ds, gids, b, grad_ev, w, static_cast<double>(b), g);
    const double gnorm = std::sqrt(ops.dot(g.data(), g.data(), g.size()));
    const double step = scheduled_step(cfg, t, k);

    if (k % cfg.trace_stride == 0) {
      const auto full = eval_batch(fam, theta, ds, nullptr, ds.n);
      const double objective = tilted_value(t, full.losses);
      guard.observe(objective, k);
      trace.rows.push_back({k, t, objective, gnorm, step});
    }
    if (t == cfg.t && gnorm < cfg.grad_tol) {
      converged = true;
      break;
    }
    ops.axpy(-step, g.data(), theta.data(), theta.size());
  }

  trace.converged = converged;
  trace.theta = std::move(theta);
  trace.wall_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  return trace;
}

}  // namespace

void SolverConfig::check() const {
  if (!(step_size > 0.0)) throw std::invalid_argument("step_size must be > 0");
  if (!(lambda > 0.0) || lambda > 1.0) throw std::invalid_argument("lambda must be in (0, 1]");
  if (max_iters == 0) throw std::invalid_argument("max_iters must be positive");
  if (batch_size == 0) throw std::invalid_argument("batch_size must be positive");
  if (trace_stride == 0) throw std::invalid_argument("trace_stride must be positive");
  if (schedule == Schedule::theorem_scaled && !(c1 > 0.0))
    throw std::invalid_argument("theorem-scaled schedule needs c1 > 0");
  if (!std::isfinite(t)) throw std::invalid_argument("tilt t must be finite");
}

double anneal_fraction(const SolverConfig& cfg, std::size_t iter) {
  if (cfg.anneal == SolverConfig::Anneal::none) return 1.0;
  const std::size_t window =
      cfg.anneal_iters ? cfg.anneal_iters : std::max<std::size_t>(1, cfg.max_iters / 2);
  if (iter >= window) return 1.0;
  return static_cast<double>(iter) / static_cast<double>(window);
}

double effective_t(const SolverConfig& cfg, std::size_t iter) {
  return cfg.t * anneal_fraction(cfg, iter);
}

double theorem_step_size(const SolverConfig& cfg, double t) {
  if (!(cfg.c1 > 0.0)) throw std::invalid_argument("theorem constants missing (c1)");
  if (t > 0.0) return 1.0 / (cfg.c1 + cfg.c2 * t);
  return 1.0 / cfg.c1;  // t-independent rate for t <= 0
}

double scheduled_step(const SolverConfig& cfg, double t, std::size_t k) {
  switch (cfg.schedule) {
    case SolverConfig::Schedule::constant:
      return cfg.step_size;
    case SolverConfig::Schedule::inverse_k:
      return cfg.step_size / static_cast<double>(k + 1);
    case SolverConfig::Schedule::theorem_scaled:
      return theorem_step_size(cfg, t);
  }
  throw std::logic_error("unreachable");
}

SolveTrace batch_term_solve(const Dataset& ds, const LossFamily& fam, std::vector<double> theta0,
                            const SolverConfig& cfg) {
  check_inputs(ds, theta0, cfg);
  const auto t0 = Clock::now();
  const auto& ops = kernels::active();
  std::vector<double> theta = std::move(theta0);
  std::vector<double> w, g(theta.size());

  SolveTrace trace;
  DivergenceGuard guard(cfg.divergence_factor);
  bool converged = false;
  for (std::size_t k = 0; k < cfg.max_iters && !converged; ++k) {
    const double t = effective_t(cfg, k);
    const auto ev = eval_batch(fam, theta, ds, nullptr, ds.n);
    const double objective = tilted_value(t, ev.losses);
    guard.observe(objective, k);

    unnormalized_tilt_weights(t, ev.losses, objective, w);
    std::fill(g.begin(), g.end(), 0.0);
    add_weighted_grads(fam, theta, ds, nullptr, ds.n, ev, w, static_cast<double>(ds.n), g);
    const double gnorm = std::sqrt(ops.dot(g.data(), g.data(), g.size()));
    const double step = scheduled_step(cfg, t, k);

    if (k % cfg.trace_stride == 0) trace.rows.push_back({k, t, objective, gnorm, step});
    if (t == cfg.t && gnorm < cfg.grad_tol) {
      converged = true;
      break;
    }
    ops.axpy(-step, g.data(), theta.data(), theta.size());
  }

  trace.converged = converged;
  trace.theta = std::move(theta);
  trace.wall_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  return trace;
}

SolveTrace stochastic_term_solve(const Dataset& ds, const LossFamily& fam,
                                 std::vector<double> theta0, const SolverConfig& cfg) {
  return stochastic_impl(ds, fam, std::move(theta0), cfg, BatchMode::one);
}

SolveTrace stochastic_term_solve_two_batch(const Dataset& ds, const LossFamily& fam,
                                           std::vector<double> theta0, const SolverConfig& cfg) {
  return stochastic_impl(ds, fam, std::move(theta0), cfg, BatchMode::two);
}

}  // namespace tilt
