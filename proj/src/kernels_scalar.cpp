#include "tilt/kernels.hpp"

#include <cmath>

namespace tilt::kernels {
namespace {

double s_reduce_min(const double* x, std::size_t n) {
  double m = x[0];
  for (std::size_t i = 1; i < n; ++i)
    if (x[i] < m) m = x[i];
  return m;
}

double s_reduce_max(const double* x, std::size_t n) {
  double m = x[0];
  for (std::size_t i = 1; i < n; ++i)
    if (x[i] > m) m = x[i];
  return m;
}

double s_reduce_sum(const double* x, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i];
  return s;
}

double s_dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void s_axpy(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

double s_exp_shift_sum(const double* x, std::size_t n, double t, double shift) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += std::exp(t * x[i] - shift);
  return s;
}

double s_exp_shift_store(const double* x, std::size_t n, double t, double shift, double* out) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = std::exp(t * x[i] - shift);
    s += out[i];
  }
  return s;
}

void s_weighted_row_sum(const double* rows, const double* c, std::size_t n, std::size_t d,
                        double* out) {
  for (std::size_t i = 0; i < n; ++i) {
    const double ci = c[i];
    const double* row = rows + i * d;
    for (std::size_t j = 0; j < d; ++j) out[j] += ci * row[j];
  }
}

const Ops scalar_ops = {
    "scalar",          s_reduce_min,       s_reduce_max, s_reduce_sum,
    s_dot,             s_axpy,             s_exp_shift_sum,
    s_exp_shift_store, s_weighted_row_sum,
};

}  // namespace

const Ops& scalar() { return scalar_ops; }

}  // namespace tilt::kernels
