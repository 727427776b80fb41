#ifndef TILT_TILT_CORE_HPP
#define TILT_TILT_CORE_HPP

#include <cstddef>
#include <span>
#include <vector>

namespace tilt {

// Row-major dense matrix, used for per-sample gradient tables.
struct RowMajor {
  std::vector<double> data;
  std::size_t rows{0};
  std::size_t cols{0};

  const double* row(std::size_t i) const { return data.data() + i * cols; }
  double* row(std::size_t i) { return data.data() + i * cols; }
};

// Normalized exponential weights of a loss vector at tilt t.
// Invariants: w_i > 0, sum w = 1 (exactly uniform at t = 0).
struct TiltWeights {
  std::vector<double> w;
  double t{0.0};
};

double min_loss(std::span<const double> f);
double max_loss(std::span<const double> f);
double mean_loss(std::span<const double> f);

// (1/t) log((1/N) sum_i e^{t f_i}), continuously extended to the mean at
// t = 0.  Evaluated in the shifted log domain (largest exponent exactly 0),
// so any finite t is safe; the result always lies in [min f, max f].
double tilted_value(double t, std::span<const double> f);

// t * tilted_value for t != 0; 0 at t = 0.
double empirical_cumulant(double t, std::span<const double> f);

TiltWeights tilt_weights(double t, std::span<const double> f);

// sum_i w_i(t) * grads[i]; the average gradient at t = 0.
std::vector<double> tilted_gradient(double t, std::span<const double> f, const RowMajor& grads);

// Shannon entropy of a weight vector, in nats.
double weight_entropy(std::span<const double> w);
double weight_entropy(const TiltWeights& tw);

// D(u || w) for the uniform vector u.
double kl_uniform_to_weights(std::span<const double> w);

// mean(f) + (1/t) D(u || w(t; f)); identical to tilted_value(t, f).
// t must be nonzero (at t = 0 the KL term vanishes and the decomposition
// degenerates to the plain mean).
double erm_plus_kl(double t, std::span<const double> f);

// (1/(1-rho)) log sum_i p_i q_i^{rho-1}; cross entropy at rho = 1 via
// continuous extension.  p must be a distribution; q needs only strictly
// positive entries (it is not normalized here, which is what makes
// tilted_value(t, f) == renyi_cross_entropy(1 - t, uniform, exp(-f)) exact).
double renyi_cross_entropy(double rho, std::span<const double> p, std::span<const double> q);

// max over simplex q of sum q_i f_i - (1/t) sum q_i log(N q_i), t > 0,
// evaluated at the closed-form maximizer q* = w(t; f).  Identical to
// tilted_value(t, f).
double dro_dual_value(double t, std::span<const double> f);

}  // namespace tilt

#endif
