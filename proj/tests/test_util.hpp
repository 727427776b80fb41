#ifndef TILT_TESTS_TEST_UTIL_HPP
#define TILT_TESTS_TEST_UTIL_HPP

// Small self-contained oracles shared by the unit and acceptance suites.
// These deliberately avoid the library's solver/kernel code paths.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "tilt/dataset.hpp"

namespace tilt_test {

// Solves A x = b for symmetric positive definite A (row-major n x n).
inline std::vector<double> cholesky_solve(std::vector<double> a, std::vector<double> b,
                                          std::size_t n) {
  for (std::size_t j = 0; j < n; ++j) {
    double diag = a[j * n + j];
    for (std::size_t k = 0; k < j; ++k) diag -= a[j * n + k] * a[j * n + k];
    if (diag <= 0.0) throw std::runtime_error("matrix not positive definite");
    a[j * n + j] = std::sqrt(diag);
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a[i * n + j];
      for (std::size_t k = 0; k < j; ++k) s -= a[i * n + k] * a[j * n + k];
      a[i * n + j] = s / a[j * n + j];
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= a[i * n + k] * b[k];
    b[i] = s / a[i * n + i];
  }
  for (std::size_t ii = n; ii-- > 0;) {
    double s = b[ii];
    for (std::size_t k = ii + 1; k < n; ++k) s -= a[k * n + ii] * b[k];
    b[ii] = s / a[ii * n + ii];
  }
  return b;
}

// Ordinary least squares via the normal equations.
inline std::vector<double> least_squares(const tilt::Dataset& ds) {
  const std::size_t d = ds.d;
  std::vector<double> xtx(d * d, 0.0), xty(d, 0.0);
  for (std::size_t i = 0; i < ds.n; ++i) {
    const double* row = ds.features.data() + i * d;
    for (std::size_t a = 0; a < d; ++a) {
      xty[a] += row[a] * ds.targets[i];
      for (std::size_t b = 0; b < d; ++b) xtx[a * d + b] += row[a] * row[b];
    }
  }
  return cholesky_solve(std::move(xtx), std::move(xty), d);
}

inline double rmse(const std::vector<double>& theta, const tilt::Dataset& ds) {
  double s = 0.0;
  for (std::size_t i = 0; i < ds.n; ++i) {
    double pred = 0.0;
    for (std::size_t j = 0; j < ds.d; ++j) pred += theta[j] * ds.features[i * ds.d + j];
    const double r = pred - ds.targets[i];
    s += r * r;
  }
  return std::sqrt(s / static_cast<double>(ds.n));
}

}  // namespace tilt_test

#endif
