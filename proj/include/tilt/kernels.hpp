#ifndef TILT_KERNELS_HPP
#define TILT_KERNELS_HPP

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace tilt::kernels {

// Array kernels behind the tilt/risk/solver stack.  Each entry point has a
// scalar reference implementation; SIMD variants of the same table are
// selected once per process based on CPU features (see active()).
//
// Conventions:
//  * arrays are contiguous doubles, no alignment requirements
//  * every variant uses a fixed accumulator layout, so results are
//    bit-stable across runs for the same inputs and the same variant
//  * exp-domain kernels expect finite arguments; t*x[i] - shift above
//    ~709 saturates to +inf, below ~-709 flushes to 0
struct Ops {
  const char* name;

  double (*reduce_min)(const double* x, std::size_t n);
  double (*reduce_max)(const double* x, std::size_t n);
  double (*reduce_sum)(const double* x, std::size_t n);
  double (*dot)(const double* a, const double* b, std::size_t n);

  // y[i] += a * x[i]
  void (*axpy)(double a, const double* x, double* y, std::size_t n);

  // sum_i exp(t * x[i] - shift)
  double (*exp_shift_sum)(const double* x, std::size_t n, double t, double shift);

  // out[i] = exp(t * x[i] - shift); returns the sum of out
  double (*exp_shift_store)(const double* x, std::size_t n, double t, double shift, double* out);

  // out[j] += sum_i c[i] * rows[i*d + j], for j in [0, d)
  void (*weighted_row_sum)(const double* rows, const double* c, std::size_t n, std::size_t d, double* out);
};

// Scalar reference table; always available.
const Ops& scalar();

// Best table supported by this CPU, or the TILT_KERNELS environment
// override ("scalar", "avx2") if set.  Resolved once, then cached.
const Ops& active();

// Variant lookup by name; nullptr if unknown or unsupported on this CPU.
const Ops* variant(std::string_view name);

// Names of the variants usable on this CPU (always includes "scalar").
std::vector<std::string> available();

}  // namespace tilt::kernels

#endif
