#include "tilt/risk.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "tilt/tilt_core.hpp"

namespace tilt {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Min1D {
  double value{kInf};
  double t{0.0};
};

// Coarse log-spaced grid over [lo, hi] (plus any extra probes), then
// golden-section refinement of the best bracket down to |b - a| <= tol.
template <typename Fn>
Min1D minimize_over_t(Fn&& fn, double lo, double hi, int points,
                      double tol, std::span<const double> extra) {
  if (!(lo > 0.0) || !(hi > lo)) throw std::invalid_argument("degenerate t search interval");
  if (points < 2 || !(tol > 0.0)) throw std::invalid_argument("bad t search parameters");
  std::vector<double> probes;
  probes.reserve(static_cast<std::size_t>(points) + extra.size());
  const double ratio = std::log(hi / lo) / static_cast<double>(points - 1);
  for (int i = 0; i < points; ++i) probes.push_back(lo * std::exp(ratio * i));
  for (double t : extra)
    if (t >= lo && t <= hi) probes.push_back(t);
  std::sort(probes.begin(), probes.end());

  Min1D best;
  std::size_t best_idx = 0;
  for (std::size_t i = 0; i < probes.size(); ++i) {
    const double v = fn(probes[i]);
    if (v < best.value) {
      best = {v, probes[i]};
      best_idx = i;
    }
  }

  double a = best_idx > 0 ? probes[best_idx - 1] : probes[best_idx];
  double b = best_idx + 1 < probes.size() ? probes[best_idx + 1] : probes[best_idx];
  constexpr double kGolden = 0.6180339887498949;
  double x1 = b - kGolden * (b - a);
  double x2 = a + kGolden * (b - a);
  double f1 = fn(x1), f2 = fn(x2);
  while (b - a > tol) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - kGolden * (b - a);
      f1 = fn(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + kGolden * (b - a);
      f2 = fn(x2);
    }
    if (f1 < best.value) best = {f1, x1};
    if (f2 < best.value) best = {f2, x2};
  }
  return best;
}

void check_alpha_unit(double alpha, bool allow_one) {
  if (!(alpha > 0.0) || alpha > 1.0 || (!allow_one && alpha == 1.0))
    throw std::invalid_argument("alpha out of range");
}

// log((e^x - (1-alpha)) / alpha), defined where e^x > 1 - alpha.  The
// log1p(expm1) form keeps small-x evaluations exact instead of cancelling
// log(u) against log(alpha).
double log_bracket_ratio(double x, double alpha) {
  if (x > 36.0)  // e^{-x} < 2e-16
    return x + std::log1p(-(1.0 - alpha) * std::exp(-x)) - std::log(alpha);
  const double r = std::expm1(x) / alpha;
  // Below ~1e-4 the bracket sits in the cancellation noise of e^x - (1-a)
  // and its log is unreliable; analytically that region lies next to the
  // [.]_+ clamp where the candidate value diverges anyway (or, in the
  // degenerate flat case, duplicates a value attained at stable t), so it
  // is treated as clamped.
  return 1.0 + r >= 1e-4 ? std::log1p(r) : -kInf;
}

struct EvarResult {
  double value;
  double t;
};

EvarResult evar_impl(double alpha, std::span<const double> f, const RiskQuery& q) {
  check_alpha_unit(alpha, /*allow_one=*/true);
  const double log_alpha = std::log(alpha);
  auto phi = [&](double t) { return tilted_value(t, f) - log_alpha / t; };
  const Min1D m = minimize_over_t(phi, q.t_lo, q.t_hi, q.grid_points, q.tol, q.extra_t_probes);
  return {m.value, m.t};
}

}  // namespace

bool RiskReport::all_ordered() const {
  for (const auto& r : rows)
    if (!r.ok_ordering) return false;
  return true;
}

double superquantile(double gamma, std::span<const double> f) {
  if (f.empty()) throw std::invalid_argument("loss vector is empty");
  std::size_t count = 0;
  for (double v : f) count += v >= gamma;
  return static_cast<double>(count) / static_cast<double>(f.size());
}

double var_empirical(double alpha, std::span<const double> f) {
  if (f.empty()) throw std::invalid_argument("loss vector is empty");
  check_alpha_unit(alpha, /*allow_one=*/true);
  const std::size_t n = f.size();
  // floor to the {k/N} grid; a small nudge keeps exact grid points intact
  const std::size_t k =
      static_cast<std::size_t>(std::floor(alpha * static_cast<double>(n) + 1e-9));
  if (k == 0) throw std::invalid_argument("alpha is below the 1/N grid");

  std::vector<double> sorted(f.begin(), f.end());
  std::sort(sorted.begin(), sorted.end());
  // smallest candidate gamma (a data value) whose tail count is <= k
  for (std::size_t j = 0; j < n; ++j) {
    if (j + 1 < n && sorted[j + 1] == sorted[j]) continue;  // not the first occurrence
    // first occurrence of sorted[j]'s value is somewhere <= j; tail count
    // for this candidate is n - (index of first occurrence)
    std::size_t first = j;
    while (first > 0 && sorted[first - 1] == sorted[j]) --first;
    if (n - first <= k) return sorted[j];
  }
  return sorted[n - 1];
}

double cvar_empirical(double alpha, std::span<const double> f) {
  if (f.empty()) throw std::invalid_argument("loss vector is empty");
  check_alpha_unit(alpha, /*allow_one=*/true);
  const std::size_t n = f.size();
  std::vector<double> sorted(f.begin(), f.end());
  std::sort(sorted.begin(), sorted.end());

  // objective gamma + (1/(alpha N)) sum (f - gamma)_+ is piecewise linear
  // and convex with breakpoints at the losses, so scanning them is exact
  std::vector<double> suffix(n + 1, 0.0);
  for (std::size_t j = n; j-- > 0;) suffix[j] = suffix[j + 1] + sorted[j];
  const double scale = 1.0 / (alpha * static_cast<double>(n));
  double best = kInf;
  for (std::size_t j = 0; j < n; ++j) {
    const double gamma = sorted[j];
    const double tail = suffix[j] - static_cast<double>(n - j) * gamma;
    best = std::min(best, gamma + scale * tail);
  }
  return best;
}

double evar_empirical(double alpha, std::span<const double> f, const RiskQuery& q) {
  if (f.empty()) throw std::invalid_argument("loss vector is empty");
  return evar_impl(alpha, f, q).value;
}

double tivar_empirical(double alpha, std::span<const double> f, const RiskQuery& q) {
  if (f.empty()) throw std::invalid_argument("loss vector is empty");
  check_alpha_unit(alpha, /*allow_one=*/true);
  const double fmin = q.f_min_global;
  if (fmin > min_loss(f) + 1e-12)
    throw std::invalid_argument("f_min_global exceeds the smallest loss");

  auto psi = [&](double t) {
    const double lam = (tilted_value(t, f) - fmin) * t;
    const double logb = log_bracket_ratio(lam, alpha);
    if (logb == -kInf) return kInf;  // clamped bracket, only reachable for t < 0
    return fmin + logb / t;
  };

  std::vector<double> extra_pos, extra_neg;
  for (double t : q.extra_t_probes) (t > 0 ? extra_pos : extra_neg).push_back(t);
  for (double& t : extra_neg) t = -t;

  const Min1D pos =
      minimize_over_t([&](double t) { return psi(t); }, q.t_lo, q.t_hi, q.grid_points, q.tol,
                      extra_pos);
  const Min1D neg =
      minimize_over_t([&](double s) { return psi(-s); }, q.t_lo, q.t_hi, q.grid_points, q.tol,
                      extra_neg);
  const double best = std::min(pos.value, neg.value);
  if (best == kInf) throw std::runtime_error("no admissible tilt in the TiVaR search");
  return best;
}

double k_loss(std::size_t k, std::span<const double> f) {
  if (f.empty()) throw std::invalid_argument("loss vector is empty");
  if (k < 1 || k > f.size()) throw std::invalid_argument("k out of range");
  std::vector<double> sorted(f.begin(), f.end());
  std::nth_element(sorted.begin(), sorted.begin() + (k - 1), sorted.end());
  return sorted[k - 1];
}

double superquantile_upper_bound(double gamma, double t, std::span<const double> f,
                                 double f_min_global) {
  if (f.empty()) throw std::invalid_argument("loss vector is empty");
  if (!(gamma > f_min_global) || !(gamma < max_loss(f)))
    throw std::invalid_argument("gamma outside (f_min_global, max f)");
  if (t == 0.0) return (mean_loss(f) - f_min_global) / (gamma - f_min_global);

  const double a = (tilted_value(t, f) - f_min_global) * t;
  const double b = (gamma - f_min_global) * t;
  if (t < 0.0) return std::expm1(a) / std::expm1(b);  // both factors in (-1, 0)
  if (a < 700.0 && b < 700.0) return std::expm1(a) / std::expm1(b);
  const double log_q = (a + std::log1p(-std::exp(-std::min(a, 745.0)))) -
                       (b + std::log1p(-std::exp(-std::min(b, 745.0))));
  return std::exp(log_q);
}

RiskReport risk_report(std::span<const double> f, std::span<const double> alphas,
                       const RiskQuery& q) {
  if (alphas.empty()) throw std::invalid_argument("no alpha values given");
  RiskReport report;
  report.rows.reserve(alphas.size());
  for (double alpha : alphas) {
    RiskRow row{};
    row.alpha = alpha;
    row.var = var_empirical(alpha, f);
    row.cvar = cvar_empirical(alpha, f);
    const EvarResult ev = evar_impl(alpha, f, q);
    row.evar = ev.value;
    // probing the EVaR minimizer keeps the reported TiVaR at or below the
    // reported EVaR even though both minima are only approximate
    RiskQuery tq = q;
    tq.extra_t_probes.push_back(ev.t);
    row.tivar = tivar_empirical(alpha, f, tq);
    row.ok_ordering = row.var <= row.tivar + 1e-9 && row.tivar <= row.evar + 1e-9 &&
                      row.var <= row.cvar + 1e-9 && row.cvar <= row.evar + 1e-9;
    report.rows.push_back(row);
  }
  return report;
}

}  // namespace tilt
