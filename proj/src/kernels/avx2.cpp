// Compiled with -mavx2 -mfma; only reached after the runtime CPU check in
// dispatch.cpp.

#include <immintrin.h>

#include <cstddef>

#include "gsched/kernels.hpp"

namespace gsched::kernels::avx2 {
namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  const __m128d sh = _mm_unpackhi_pd(s, s);
  return _mm_cvtsd_f64(_mm_add_sd(s, sh));
}

}  // namespace

double sum_squares(std::span<const double> x) {
  const std::size_t n = x.size();
  const double* p = x.data();
  __m256d a0 = _mm256_setzero_pd();
  __m256d a1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256d v0 = _mm256_loadu_pd(p + i);
    const __m256d v1 = _mm256_loadu_pd(p + i + 4);
    a0 = _mm256_fmadd_pd(v0, v0, a0);
    a1 = _mm256_fmadd_pd(v1, v1, a1);
  }
  for (; i + 4 <= n; i += 4) {
    const __m256d v = _mm256_loadu_pd(p + i);
    a0 = _mm256_fmadd_pd(v, v, a0);
  }
  double acc = hsum(_mm256_add_pd(a0, a1));
  for (; i < n; ++i) acc += p[i] * p[i];
  return acc;
}

double sum_squared_diff(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  const double* px = x.data();
  const double* py = y.data();
  __m256d a0 = _mm256_setzero_pd();
  __m256d a1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256d d0 = _mm256_sub_pd(_mm256_loadu_pd(px + i), _mm256_loadu_pd(py + i));
    const __m256d d1 =
        _mm256_sub_pd(_mm256_loadu_pd(px + i + 4), _mm256_loadu_pd(py + i + 4));
    a0 = _mm256_fmadd_pd(d0, d0, a0);
    a1 = _mm256_fmadd_pd(d1, d1, a1);
  }
  for (; i + 4 <= n; i += 4) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(px + i), _mm256_loadu_pd(py + i));
    a0 = _mm256_fmadd_pd(d, d, a0);
  }
  double acc = hsum(_mm256_add_pd(a0, a1));
  for (; i < n; ++i) {
    const double d = px[i] - py[i];
    acc += d * d;
  }
  return acc;
}

void axpy(double a, std::span<const double> x, std::span<const double> y,
          std::span<double> out) {
  const std::size_t n = x.size();
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d r =
        _mm256_fmadd_pd(va, _mm256_loadu_pd(x.data() + i), _mm256_loadu_pd(y.data() + i));
    _mm256_storeu_pd(out.data() + i, r);
  }
  for (; i < n; ++i) out[i] = y[i] + a * x[i];
}

double reciprocal_sum(std::span<const double> x, double offset) {
  const std::size_t n = x.size();
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d off = _mm256_set1_pd(offset);
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d v = _mm256_add_pd(_mm256_loadu_pd(x.data() + i), off);
    acc = _mm256_add_pd(acc, _mm256_div_pd(one, v));
  }
  double r = hsum(acc);
  for (; i < n; ++i) r += 1.0 / (x[i] + offset);
  return r;
}

double shifted_sum(std::span<const double> x, double offset) {
  const std::size_t n = x.size();
  const __m256d off = _mm256_set1_pd(offset);
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc = _mm256_add_pd(acc, _mm256_add_pd(_mm256_loadu_pd(x.data() + i), off));
  }
  double r = hsum(acc);
  for (; i < n; ++i) r += x[i] + offset;
  return r;
}

}  // namespace gsched::kernels::avx2
