// AVX2/FMA kernel variant.  This translation unit is the only one compiled
// with -mavx2 -mfma; it is referenced through the dispatch table and never
// entered unless the CPU reports both features.

#include "tilt/kernels.hpp"

#ifdef __AVX2__

#include <immintrin.h>

#include <cmath>
#include <cstdint>
#include <limits>

namespace tilt::kernels {
namespace {

// exp() via Cephes-style range reduction: x = n*ln2 + r, |r| <= ln2/2,
// e^r from a Pade approximant, scale by 2^n through the exponent bits.
// Inputs outside [kExpMin, kExpMax] flush to 0 / +inf.
constexpr double kLog2E = 1.4426950408889634073599;
constexpr double kLn2Hi = 6.93145751953125e-1;
constexpr double kLn2Lo = 1.42860682030941723212e-6;
constexpr double kExpP0 = 1.26177193074810590878e-4;
constexpr double kExpP1 = 3.02994407707441961300e-2;
constexpr double kExpP2 = 9.99999999999999999910e-1;
constexpr double kExpQ0 = 3.00198505138664455042e-6;
constexpr double kExpQ1 = 2.52448340349684104192e-3;
constexpr double kExpQ2 = 2.27265548208155028766e-1;
constexpr double kExpQ3 = 2.00000000000000000005e0;
constexpr double kExpMax = 709.0;
constexpr double kExpMin = -708.39;

double exp1(double x) {
  if (x > kExpMax) return std::numeric_limits<double>::infinity();
  if (x < kExpMin) return 0.0;
  double px = std::nearbyint(x * kLog2E);
  const int n = static_cast<int>(px);
  x -= px * kLn2Hi;
  x -= px * kLn2Lo;
  const double xx = x * x;
  px = x * ((kExpP0 * xx + kExpP1) * xx + kExpP2);
  double e = 1.0 + 2.0 * px / ((((kExpQ0 * xx + kExpQ1) * xx + kExpQ2) * xx + kExpQ3) - px);
  std::int64_t bits;
  __builtin_memcpy(&bits, &e, 8);
  bits += static_cast<std::int64_t>(n) << 52;
  __builtin_memcpy(&e, &bits, 8);
  return e;
}

__m256d exp4(__m256d x) {
  const __m256d big = _mm256_cmp_pd(x, _mm256_set1_pd(kExpMax), _CMP_GT_OQ);
  const __m256d small = _mm256_cmp_pd(x, _mm256_set1_pd(kExpMin), _CMP_LT_OQ);
  // keep the clamped lanes in range so the bit twiddling below stays valid
  x = _mm256_min_pd(_mm256_max_pd(x, _mm256_set1_pd(kExpMin)), _mm256_set1_pd(kExpMax));

  const __m256d px = _mm256_round_pd(_mm256_mul_pd(x, _mm256_set1_pd(kLog2E)),
                                     _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  x = _mm256_fnmadd_pd(px, _mm256_set1_pd(kLn2Hi), x);
  x = _mm256_fnmadd_pd(px, _mm256_set1_pd(kLn2Lo), x);

  const __m256d xx = _mm256_mul_pd(x, x);
  __m256d p = _mm256_set1_pd(kExpP0);
  p = _mm256_fmadd_pd(p, xx, _mm256_set1_pd(kExpP1));
  p = _mm256_fmadd_pd(p, xx, _mm256_set1_pd(kExpP2));
  p = _mm256_mul_pd(p, x);
  __m256d q = _mm256_set1_pd(kExpQ0);
  q = _mm256_fmadd_pd(q, xx, _mm256_set1_pd(kExpQ1));
  q = _mm256_fmadd_pd(q, xx, _mm256_set1_pd(kExpQ2));
  q = _mm256_fmadd_pd(q, xx, _mm256_set1_pd(kExpQ3));
  __m256d e = _mm256_add_pd(
      _mm256_set1_pd(1.0),
      _mm256_mul_pd(_mm256_set1_pd(2.0), _mm256_div_pd(p, _mm256_sub_pd(q, p))));

  const __m128i n32 = _mm256_cvtpd_epi32(px);
  const __m256i n64 = _mm256_cvtepi32_epi64(n32);
  e = _mm256_castsi256_pd(
      _mm256_add_epi64(_mm256_castpd_si256(e), _mm256_slli_epi64(n64, 52)));

  e = _mm256_blendv_pd(e, _mm256_set1_pd(std::numeric_limits<double>::infinity()), big);
  e = _mm256_blendv_pd(e, _mm256_setzero_pd(), small);
  return e;
}

double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s2 = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s2, _mm_unpackhi_pd(s2, s2)));
}

double a_reduce_min(const double* x, std::size_t n) {
  std::size_t i = 0;
  double m = x[0];
  if (n >= 4) {
    __m256d acc = _mm256_loadu_pd(x);
    for (i = 4; i + 4 <= n; i += 4) acc = _mm256_min_pd(acc, _mm256_loadu_pd(x + i));
    const __m128d lo = _mm256_castpd256_pd128(acc);
    const __m128d hi = _mm256_extractf128_pd(acc, 1);
    const __m128d m2 = _mm_min_pd(lo, hi);
    m = _mm_cvtsd_f64(_mm_min_sd(m2, _mm_unpackhi_pd(m2, m2)));
  }
  for (; i < n; ++i)
    if (x[i] < m) m = x[i];
  return m;
}

double a_reduce_max(const double* x, std::size_t n) {
  std::size_t i = 0;
  double m = x[0];
  if (n >= 4) {
    __m256d acc = _mm256_loadu_pd(x);
    for (i = 4; i + 4 <= n; i += 4) acc = _mm256_max_pd(acc, _mm256_loadu_pd(x + i));
    const __m128d lo = _mm256_castpd256_pd128(acc);
    const __m128d hi = _mm256_extractf128_pd(acc, 1);
    const __m128d m2 = _mm_max_pd(lo, hi);
    m = _mm_cvtsd_f64(_mm_max_sd(m2, _mm_unpackhi_pd(m2, m2)));
  }
  for (; i < n; ++i)
    if (x[i] > m) m = x[i];
  return m;
}

double a_reduce_sum(const double* x, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
  double s = hsum(acc);
  for (; i < n; ++i) s += x[i];
  return s;
}

double a_dot(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc);
  double s = hsum(acc);
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void a_axpy(double a, const double* x, double* y, std::size_t n) {
  const __m256d av = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d r = _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i));
    _mm256_storeu_pd(y + i, r);
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

double a_exp_shift_sum(const double* x, std::size_t n, double t, double shift) {
  const __m256d tv = _mm256_set1_pd(t);
  const __m256d sv = _mm256_set1_pd(shift);
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    acc = _mm256_add_pd(acc, exp4(_mm256_fmsub_pd(tv, _mm256_loadu_pd(x + i), sv)));
  double s = hsum(acc);
  for (; i < n; ++i) s += exp1(t * x[i] - shift);
  return s;
}

double a_exp_shift_store(const double* x, std::size_t n, double t, double shift, double* out) {
  const __m256d tv = _mm256_set1_pd(t);
  const __m256d sv = _mm256_set1_pd(shift);
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d e = exp4(_mm256_fmsub_pd(tv, _mm256_loadu_pd(x + i), sv));
    _mm256_storeu_pd(out + i, e);
    acc = _mm256_add_pd(acc, e);
  }
  double s = hsum(acc);
  for (; i < n; ++i) {
    out[i] = exp1(t * x[i] - shift);
    s += out[i];
  }
  return s;
}

void a_weighted_row_sum(const double* rows, const double* c, std::size_t n, std::size_t d,
                        double* out) {
  for (std::size_t i = 0; i < n; ++i) {
    const __m256d ci = _mm256_set1_pd(c[i]);
    const double* row = rows + i * d;
    std::size_t j = 0;
    for (; j + 4 <= d; j += 4) {
      const __m256d r = _mm256_fmadd_pd(ci, _mm256_loadu_pd(row + j), _mm256_loadu_pd(out + j));
      _mm256_storeu_pd(out + j, r);
    }
    for (; j < d; ++j) out[j] += c[i] * row[j];
  }
}

const Ops avx2_ops = {
    "avx2",            a_reduce_min,       a_reduce_max, a_reduce_sum,
    a_dot,             a_axpy,             a_exp_shift_sum,
    a_exp_shift_store, a_weighted_row_sum,
};

}  // namespace

namespace detail {
const Ops* avx2_table() { return &avx2_ops; }
}  // namespace detail

}  // namespace tilt::kernels

#endif  // __AVX2__
