#include "tilt/hierarchy.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "tilt/kernels.hpp"

namespace tilt {

namespace {

using Clock = std::chrono::steady_clock;

std::vector<double> gather(std::span<const double> f, const std::vector<std::size_t>& ids) {
  std::vector<double> out(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) out[i] = f[ids[i]];
  return out;
}

// J = (1/t) log((1/N) sum_g |g| e^{t r_g}), continuously extended at t = 0
double combine_group_values(double t, std::span<const double> r, const GroupIndex& gi) {
  const double n = static_cast<double>(gi.total());
  if (t == 0.0) {
    double s = 0.0;
    for (std::size_t g = 0; g < r.size(); ++g)
      s += static_cast<double>(gi.group_size(g)) * r[g];
    return s / n;
  }
  double hi = -std::numeric_limits<double>::infinity();
  for (double v : r) hi = std::max(hi, t * v);
  double s = 0.0;
  for (std::size_t g = 0; g < r.size(); ++g)
    s += static_cast<double>(gi.group_size(g)) * std::exp(t * r[g] - hi);
  return (hi + std::log(s) - std::log(n)) / t;
}

void check_group_losses(std::span<const double> f, const GroupIndex& gi) {
  if (gi.group_count() == 0) throw std::invalid_argument("no groups");
  if (gi.total() != f.size()) throw std::invalid_argument("group index does not cover f");
}

}  // namespace

std::size_t GroupIndex::total() const {
  std::size_t n = 0;
  for (const auto& m : members) n += m.size();
  return n;
}

GroupIndex GroupIndex::build(const Dataset& ds) {
  if (!ds.has_groups()) throw std::invalid_argument("dataset has no group column");
  const std::size_t g_count = ds.group_count();  // validates contiguity
  GroupIndex gi;
  gi.members.resize(g_count);
  for (std::size_t i = 0; i < ds.n; ++i)
    gi.members[static_cast<std::size_t>(ds.groups[i])].push_back(i);
  return gi;
}

std::vector<double> group_tilted_losses(double tau, std::span<const double> f,
                                        const GroupIndex& gi) {
  check_group_losses(f, gi);
  std::vector<double> r(gi.group_count());
  for (std::size_t g = 0; g < gi.group_count(); ++g)
    r[g] = tilted_value(tau, gather(f, gi.members[g]));
  return r;
}

double hierarchical_value(const HierTilt& h, std::span<const double> f, const GroupIndex& gi) {
  const auto r = group_tilted_losses(h.tau, f, gi);
  const double j = combine_group_values(h.t, r, gi);
  return std::clamp(j, min_loss(f), max_loss(f));
}

std::vector<double> hierarchical_weights(const HierTilt& h, std::span<const double> f,
                                         const GroupIndex& gi) {
  check_group_losses(f, gi);
  const auto r = group_tilted_losses(h.tau, f, gi);
  const double j = combine_group_values(h.t, r, gi);
  const double log_n = std::log(static_cast<double>(f.size()));

  // log w_{g,x} = (t - tau) R_g + tau f_x - log N - t J
  std::vector<double> w(f.size());
  double sum = 0.0;
  for (std::size_t g = 0; g < gi.group_count(); ++g) {
    const double group_term = (h.t - h.tau) * r[g] - log_n - h.t * j;
    for (std::size_t idx : gi.members[g]) {
      w[idx] = std::exp(group_term + h.tau * f[idx]);
      sum += w[idx];
    }
  }
  for (auto& v : w) v /= sum;
  return w;
}

std::vector<double> group_tilted_losses(double tau, const Dataset& ds, const LossFamily& fam,
                                        std::span<const double> theta) {
  return group_tilted_losses(tau, batch_losses(fam, theta, ds), GroupIndex::build(ds));
}

double hierarchical_value(const HierTilt& h, const Dataset& ds, const LossFamily& fam,
                          std::span<const double> theta) {
  return hierarchical_value(h, batch_losses(fam, theta, ds), GroupIndex::build(ds));
}

std::vector<double> hierarchical_weights(const HierTilt& h, const Dataset& ds,
                                         const LossFamily& fam, std::span<const double> theta) {
  return hierarchical_weights(h, batch_losses(fam, theta, ds), GroupIndex::build(ds));
}

std::vector<double> hierarchical_gradient(const HierTilt& h, std::span<const double> f,
                                          const RowMajor& grads, const GroupIndex& gi) {
  if (grads.rows != f.size()) throw std::invalid_argument("gradient count != loss count");
  const auto w = hierarchical_weights(h, f, gi);
  std::vector<double> g(grads.cols, 0.0);
  kernels::active().weighted_row_sum(grads.data.data(), w.data(), grads.rows, grads.cols,
                                     g.data());
  return g;
}

std::vector<double> group_sampling_probs(double t, std::span<const double> estimates,
                                         const GroupIndex& gi) {
  if (estimates.size() != gi.group_count())
    throw std::invalid_argument("one estimate per group required");
  double hi = -std::numeric_limits<double>::infinity();
  for (std::size_t g = 0; g < estimates.size(); ++g)
    hi = std::max(hi, t * estimates[g] + std::log(static_cast<double>(gi.group_size(g))));
  std::vector<double> p(estimates.size());
  double sum = 0.0;
  for (std::size_t g = 0; g < estimates.size(); ++g) {
    p[g] = std::exp(t * estimates[g] + std::log(static_cast<double>(gi.group_size(g))) - hi);
    sum += p[g];
  }
  for (auto& v : p) v /= sum;
  return p;
}

std::size_t sample_group(double t, std::span<const double> estimates, const GroupIndex& gi,
                         Rng& rng) {
  const auto p = group_sampling_probs(t, estimates, gi);
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t g = 0; g + 1 < p.size(); ++g) {
    acc += p[g];
    if (u < acc) return g;
  }
  return p.size() - 1;
}

namespace {

struct HierEval {
  std::vector<double> losses;
  std::vector<double> margins;  // empty for the point family
};

HierEval eval_all(const LossFamily& fam, std::span<const double> theta, const Dataset& ds) {
  const auto& ops = kernels::active();
  HierEval ev;
  ev.losses.resize(ds.n);
  if (fam.is_linear()) {
    ev.margins.resize(ds.n);
    for (std::size_t i = 0; i < ds.n; ++i) {
      ev.margins[i] = ops.dot(theta.data(), ds.features.data() + i * ds.d, ds.d);
      ev.losses[i] = margin_loss(fam, ev.margins[i], ds.targets[i]);
    }
  } else {
    for (std::size_t i = 0; i < ds.n; ++i)
      ev.losses[i] = loss_value(fam, theta, ds.row(i), ds.targets[i]);
  }
  return ev;
}

// g += (1/scale) sum over listed rows of w[i] grad f_row(theta)
void add_rows_weighted(const LossFamily& fam, std::span<const double> theta, const Dataset& ds,
                       const std::size_t* rows, std::size_t count, const double* margins,
                       std::span<const double> w, double scale, std::span<double> g) {
  const auto& ops = kernels::active();
  if (fam.is_linear()) {
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t r = rows ? rows[i] : i;
      const double c = w[i] * margin_derivative(fam, margins[i], ds.targets[r]) / scale;
      ops.axpy(c, ds.features.data() + r * ds.d, g.data(), ds.d);
    }
  } else {
    double wsum = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t r = rows ? rows[i] : i;
      ops.axpy(-2.0 * w[i] / scale, ds.features.data() + r * ds.d, g.data(), ds.d);
      wsum += w[i];
    }
    ops.axpy(2.0 * wsum / scale, theta.data(), g.data(), ds.d);
  }
}

void check_hier_inputs(const Dataset& ds, std::span<const double> theta0,
                       const SolverConfig& cfg, const GroupIndex& gi) {
  cfg.check();
  if (theta0.size() != ds.d) throw std::invalid_argument("theta0 dimension mismatch");
  for (const auto& m : gi.members)
    if (m.empty()) throw std::invalid_argument("empty group");
}

double tilted_average(double t, double a, double b, double lambda) {
  if (lambda == 1.0) return b;
  if (t == 0.0) return (1.0 - lambda) * a + lambda * b;
  const double xa = std::log1p(-lambda) + t * a;
  const double xb = std::log(lambda) + t * b;
  const double hi = std::max(xa, xb);
  return (hi + std::log1p(std::exp(std::min(xa, xb) - hi))) / t;
}

}  // namespace

SolveTrace batch_hierarchical_solve(const Dataset& ds, const LossFamily& fam,
                                    std::vector<double> theta0, const HierTilt& h,
                                    const SolverConfig& cfg) {
  const GroupIndex gi = GroupIndex::build(ds);
  check_hier_inputs(ds, theta0, cfg, gi);
  const auto start = Clock::now();
  const auto& ops = kernels::active();
  std::vector<double> theta = std::move(theta0);
  std::vector<double> g(theta.size()), wsample(ds.n);

  SolveTrace trace;
  bool converged = false;
  double reference = 0.0;
  for (std::size_t k = 0; k < cfg.max_iters && !converged; ++k) {
    const double ramp = anneal_fraction(cfg, k);
    const HierTilt ht{h.t * ramp, h.tau * ramp};

    const auto ev = eval_all(fam, theta, ds);
    const auto r = group_tilted_losses(ht.tau, ev.losses, gi);
    const double objective = combine_group_values(ht.t, r, gi);
    if (!std::isfinite(objective))
      throw divergence_error("objective became non-finite at iteration " + std::to_string(k));
    if (k == 0)
      reference = objective;
    else if (objective > reference + cfg.divergence_factor * std::max(1.0, std::abs(reference)))
      throw divergence_error("objective diverged at iteration " + std::to_string(k));

    // per-sample coefficient (w_{t,tau,g} / |g|) e^{tau (f_x - R_g)}
    for (std::size_t grp = 0; grp < gi.group_count(); ++grp) {
      const double group_w = std::exp(ht.t * (r[grp] - objective));
      for (std::size_t idx : gi.members[grp])
        wsample[idx] = group_w * std::exp(ht.tau * (ev.losses[idx] - r[grp]));
    }
    std::fill(g.begin(), g.end(), 0.0);
    add_rows_weighted(fam, theta, ds, nullptr, ds.n,
                      ev.margins.empty() ? nullptr : ev.margins.data(), wsample,
                      static_cast<double>(ds.n), g);
    const double gnorm = std::sqrt(ops.dot(g.data(), g.data(), g.size()));
    const double step = scheduled_step(cfg, ht.t, k);

    if (k % cfg.trace_stride == 0) trace.rows.push_back({k, ht.t, objective, gnorm, step});
    if (ramp == 1.0 && gnorm < cfg.grad_tol) {
      converged = true;
      break;
    }
    ops.axpy(-step, g.data(), theta.data(), theta.size());
  }

  trace.converged = converged;
  trace.theta = std::move(theta);
  trace.wall_seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return trace;
}

SolveTrace stochastic_hierarchical_solve(const Dataset& ds, const LossFamily& fam,
                                         std::vector<double> theta0, const HierTilt& h,
                                         const SolverConfig& cfg) {
  const GroupIndex gi = GroupIndex::build(ds);
  check_hier_inputs(ds, theta0, cfg, gi);
  if (h.t == 0.0) throw std::invalid_argument("group-level t must be nonzero");
  const auto start = Clock::now();
  const auto& ops = kernels::active();
  Rng rng(cfg.seed);
  std::vector<double> theta = std::move(theta0);

  std::vector<double> estimates(gi.group_count(), 0.0);
  if (cfg.hier_init_full_pass) {
    const auto ev = eval_all(fam, theta, ds);
    estimates = group_tilted_losses(h.tau * anneal_fraction(cfg, 0), ev.losses, gi);
  }

  SolveTrace trace;
  std::vector<double> g(theta.size());
  bool converged = false;
  double reference = 0.0;
  bool have_reference = false;
  for (std::size_t k = 0; k < cfg.max_iters && !converged; ++k) {
    const double ramp = anneal_fraction(cfg, k);
    const HierTilt ht{h.t * ramp, h.tau * ramp};

    const std::size_t grp = sample_group(ht.t, estimates, gi, rng);
    const auto& members = gi.members[grp];
    const std::size_t b = std::min(cfg.batch_size, members.size());
    std::vector<std::size_t> rows(b);
    {
      auto pick = rng.sample_indices(members.size(), b);
      for (std::size_t i = 0; i < b; ++i) rows[i] = members[pick[i]];
    }

    std::vector<double> losses(b), margins(fam.is_linear() ? b : 0), w(b);
    for (std::size_t i = 0; i < b; ++i) {
      if (fam.is_linear()) {
        margins[i] = ops.dot(theta.data(), ds.features.data() + rows[i] * ds.d, ds.d);
        losses[i] = margin_loss(fam, margins[i], ds.targets[rows[i]]);
      } else {
        losses[i] = loss_value(fam, theta, ds.row(rows[i]), ds.targets[rows[i]]);
      }
    }
    estimates[grp] = tilted_average(ht.tau, estimates[grp], tilted_value(ht.tau, losses),
                                    cfg.lambda);
    if (!std::isfinite(estimates[grp]))
      throw divergence_error("group estimate became non-finite at iteration " +
                             std::to_string(k));

    for (std::size_t i = 0; i < b; ++i)
      w[i] = ht.tau == 0.0 ? 1.0 : std::exp(ht.tau * (losses[i] - estimates[grp]));
    std::fill(g.begin(), g.end(), 0.0);
    add_rows_weighted(fam, theta, ds, rows.data(), b, margins.empty() ? nullptr : margins.data(),
                      w, static_cast<double>(b), g);
    const double gnorm = std::sqrt(ops.dot(g.data(), g.data(), g.size()));
    const double step = scheduled_step(cfg, ht.t, k);

    if (k % cfg.trace_stride == 0) {
      const auto ev = eval_all(fam, theta, ds);
      const double objective =
          combine_group_values(ht.t, group_tilted_losses(ht.tau, ev.losses, gi), gi);
      if (!std::isfinite(objective))
        throw divergence_error("objective became non-finite at iteration " + std::to_string(k));
      if (!have_reference) {
        reference = objective;
        have_reference = true;
      } else if (objective >
                 reference + cfg.divergence_factor * std::max(1.0, std::abs(reference))) {
        throw divergence_error("objective diverged at iteration " + std::to_string(k));
      }
      trace.rows.push_back({k, ht.t, objective, gnorm, step});
    }
    if (ramp == 1.0 && gnorm < cfg.grad_tol) {
      converged = true;
      break;
    }
    ops.axpy(-step, g.data(), theta.data(), theta.size());
  }

  trace.converged = converged;
  trace.theta = std::move(theta);
  trace.wall_seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return trace;
}

}  // namespace tilt
