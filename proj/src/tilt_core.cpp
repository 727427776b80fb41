#include "tilt/tilt_core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "tilt/kernels.hpp"

namespace tilt {

namespace {

void require_nonempty(std::span<const double> f) {
  if (f.empty()) throw std::invalid_argument("loss vector is empty");
}

void require_finite_t(double t) {
  if (!std::isfinite(t)) throw std::invalid_argument("tilt t must be finite");
}

}  // namespace

double min_loss(std::span<const double> f) {
  require_nonempty(f);
  return kernels::active().reduce_min(f.data(), f.size());
}

double max_loss(std::span<const double> f) {
  require_nonempty(f);
  return kernels::active().reduce_max(f.data(), f.size());
}

double mean_loss(std::span<const double> f) {
  require_nonempty(f);
  return kernels::active().reduce_sum(f.data(), f.size()) / static_cast<double>(f.size());
}

double tilted_value(double t, std::span<const double> f) {
  require_nonempty(f);
  require_finite_t(t);
  const auto& ops = kernels::active();
  const double n = static_cast<double>(f.size());
  const double lo = ops.reduce_min(f.data(), f.size());
  const double hi = ops.reduce_max(f.data(), f.size());
  double v;
  if (t == 0.0) {
    v = ops.reduce_sum(f.data(), f.size()) / n;
  } else if (std::abs(t) * (hi - lo) < 0.5) {
    // small-exponent regime: log(S) - log(N) cancels to O(t), which the
    // plain path resolves only to eps/t absolute; sum expm1 terms instead
    const double shift = (t > 0.0) ? t * hi : t * lo;
    double d = 0.0;
    for (double x : f) d += std::expm1(t * x - shift);
    v = (shift + std::log1p(d / n)) / t;
  } else {
    // shift so the largest exponent is exactly zero
    const double shift = (t > 0.0) ? t * hi : t * lo;
    const double s = ops.exp_shift_sum(f.data(), f.size(), t, shift);
    v = (shift + std::log(s) - std::log(n)) / t;
  }
  // the value is in [min f, max f] analytically; keep fp dust out too
  return std::clamp(v, lo, hi);
}

double empirical_cumulant(double t, std::span<const double> f) {
  if (t == 0.0) {
    require_nonempty(f);
    return 0.0;
  }
  return t * tilted_value(t, f);
}

TiltWeights tilt_weights(double t, std::span<const double> f) {
  require_nonempty(f);
  require_finite_t(t);
  TiltWeights tw;
  tw.t = t;
  tw.w.resize(f.size());
  if (t == 0.0) {
    std::fill(tw.w.begin(), tw.w.end(), 1.0 / static_cast<double>(f.size()));
    return tw;
  }
  const auto& ops = kernels::active();
  const double shift = (t > 0.0) ? t * ops.reduce_max(f.data(), f.size())
                                 : t * ops.reduce_min(f.data(), f.size());
  const double s = ops.exp_shift_store(f.data(), f.size(), t, shift, tw.w.data());
  for (auto& w : tw.w) w /= s;
  return tw;
}

std::vector<double> tilted_gradient(double t, std::span<const double> f, const RowMajor& grads) {
  if (grads.rows != f.size()) throw std::invalid_argument("gradient count != loss count");
  const TiltWeights tw = tilt_weights(t, f);
  std::vector<double> g(grads.cols, 0.0);
  kernels::active().weighted_row_sum(grads.data.data(), tw.w.data(), grads.rows, grads.cols,
                                     g.data());
  return g;
}

double weight_entropy(std::span<const double> w) {
  double h = 0.0;
  for (double wi : w)
    if (wi > 0.0) h -= wi * std::log(wi);
  return h;
}

double weight_entropy(const TiltWeights& tw) { return weight_entropy(tw.w); }

double kl_uniform_to_weights(std::span<const double> w) {
  require_nonempty(w);
  const double n = static_cast<double>(w.size());
  double sum_log = 0.0;
  for (double wi : w) sum_log += std::log(wi);
  return -std::log(n) - sum_log / n;
}

double erm_plus_kl(double t, std::span<const double> f) {
  if (t == 0.0) throw std::invalid_argument("decomposition needs t != 0; use mean_loss");
  const TiltWeights tw = tilt_weights(t, f);
  return mean_loss(f) + kl_uniform_to_weights(tw.w) / t;
}

double renyi_cross_entropy(double rho, std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw std::invalid_argument("p and q sizes differ");
  require_nonempty(p);
  double psum = 0.0;
  for (double pi : p) {
    if (pi < 0.0) throw std::invalid_argument("p has a negative entry");
    psum += pi;
  }
  if (std::abs(psum - 1.0) > 1e-8) throw std::invalid_argument("p does not sum to 1");
  for (double qi : q)
    if (!(qi > 0.0)) throw std::invalid_argument("q entries must be positive");

  if (rho == 1.0) {
    double ce = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i)
      if (p[i] > 0.0) ce -= p[i] * std::log(q[i]);
    return ce;
  }

  // log-sum-exp over log p_i + (rho-1) log q_i
  std::vector<double> a(p.size());
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < p.size(); ++i) {
    a[i] = (p[i] > 0.0 ? std::log(p[i]) : -std::numeric_limits<double>::infinity()) +
           (rho - 1.0) * std::log(q[i]);
    m = std::max(m, a[i]);
  }
  const double s = kernels::active().exp_shift_sum(a.data(), a.size(), 1.0, m);
  return (m + std::log(s)) / (1.0 - rho);
}

double dro_dual_value(double t, std::span<const double> f) {
  if (!(t > 0.0)) throw std::invalid_argument("dro dual needs t > 0");
  const TiltWeights tw = tilt_weights(t, f);
  const double n = static_cast<double>(f.size());
  const double ewf = kernels::active().dot(tw.w.data(), f.data(), f.size());
  double reg = 0.0;  // sum w_i log(N w_i), with 0 log 0 = 0
  for (double wi : tw.w)
    if (wi > 0.0) reg += wi * (std::log(n) + std::log(wi));
  return ewf - reg / t;
}

}  // namespace tilt
