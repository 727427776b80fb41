#ifndef TILT_RISK_HPP
#define TILT_RISK_HPP

#include <span>
#include <vector>

namespace tilt {

// Parameters of the 1-D inner minimizations over the tilt t (EVaR, TiVaR):
// a log-spaced coarse grid per sign followed by golden-section refinement.
// The returned minima are certified only as upper bounds of the infima.
//
// f_min_global is the anchor constant of TiVaR and the superquantile upper
// bound: a lower bound on the smallest loss over all parameters.  It is an
// input, never computed here (the definition minimizes over parameters,
// which a per-loss-vector evaluation must not do); 0 is correct for
// nonnegative loss families.
struct RiskQuery {
  double f_min_global{0.0};
  double t_lo{1e-4};
  double t_hi{1e3};
  double tol{1e-8};
  int grid_points{64};
  std::vector<double> extra_t_probes;  // evaluated in addition to the grid
};

struct RiskRow {
  double alpha;
  double var;
  double cvar;
  double evar;
  double tivar;
  bool ok_ordering;
};

struct RiskReport {
  std::vector<RiskRow> rows;
  bool all_ordered() const;
};

// Fraction of losses no smaller than gamma, in {0, 1/N, ..., 1}.
double superquantile(double gamma, std::span<const double> f);

// Smallest order statistic gamma with superquantile(gamma) <= alpha.
// Off-grid alpha floors to the k/N grid point below.
double var_empirical(double alpha, std::span<const double> f);

// Rockafellar-Uryasev form, minimized exactly over the loss breakpoints.
double cvar_empirical(double alpha, std::span<const double> f);

// min over t in [t_lo, t_hi] of tilted_value(t, f) - log(alpha) / t.
double evar_empirical(double alpha, std::span<const double> f, const RiskQuery& q);

// min over t in [-t_hi, -t_lo] u [t_lo, t_hi] of
//   f_min + (1/t) log [ (e^{(R(t)-f_min) t} - (1-alpha)) / alpha ]_+ ,
// where a nonpositive bracket (possible only for t < 0) contributes no
// finite candidate and is skipped.
double tivar_empirical(double alpha, std::span<const double> f, const RiskQuery& q);

// k-th smallest loss, 1-based.
double k_loss(std::size_t k, std::span<const double> f);

// (e^{R(t) t} - e^{f_min t}) / (e^{gamma t} - e^{f_min t}), an upper bound
// on superquantile(gamma) for every t != 0; t = 0 is the continuous
// extension (mean - f_min) / (gamma - f_min).  Requires
// f_min < gamma < max f.
double superquantile_upper_bound(double gamma, double t, std::span<const double> f,
                                 double f_min_global);

RiskReport risk_report(std::span<const double> f, std::span<const double> alphas,
                       const RiskQuery& q);

}  // namespace tilt

#endif
