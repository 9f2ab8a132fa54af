// AVX2+FMA variants of the sample-domain kernels. Compiled with -mavx2 -mfma
// on x86-64 only; dispatch in kernels.cpp guards execution behind a runtime
// CPU check.

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include <cstddef>

namespace oedmt::kernels::avx2 {

namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d shuf = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, shuf));
}

}  // namespace

double dot(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d av = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d yv = _mm256_loadu_pd(y + i);
    yv = _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), yv);
    _mm256_storeu_pd(y + i, yv);
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void ou_precision_apply(const double* x, double* y, std::size_t n, double rho, double inv_scale) {
  const double c = inv_scale / (1.0 - rho * rho);
  const double d = (1.0 + rho * rho) * c;
  const double e = -rho * c;

  y[0] = c * x[0] + e * x[1];

  const __m256d dv = _mm256_set1_pd(d);
  const __m256d ev = _mm256_set1_pd(e);
  std::size_t i = 1;
  // Interior stencil: y[i] = e*x[i-1] + d*x[i] + e*x[i+1].
  for (; i + 4 < n; i += 4) {
    __m256d left = _mm256_loadu_pd(x + i - 1);
    __m256d mid = _mm256_loadu_pd(x + i);
    __m256d right = _mm256_loadu_pd(x + i + 1);
    __m256d r = _mm256_mul_pd(dv, mid);
    r = _mm256_fmadd_pd(ev, _mm256_add_pd(left, right), r);
    _mm256_storeu_pd(y + i, r);
  }
  for (; i + 1 < n; ++i) {
    y[i] = e * x[i - 1] + d * x[i] + e * x[i + 1];
  }
  y[n - 1] = e * x[n - 2] + c * x[n - 1];
}

void gram6(const double* a, std::size_t lda, const double* b, std::size_t ldb, std::size_t n,
           double* c) {
  // Two a-columns per pass keeps 12 accumulators + 3 live loads in registers.
  for (int p = 0; p < 6; p += 2) {
    const double* a0 = a + static_cast<std::size_t>(p) * lda;
    const double* a1 = a + static_cast<std::size_t>(p + 1) * lda;
    __m256d acc0[6], acc1[6];
    for (int q = 0; q < 6; ++q) {
      acc0[q] = _mm256_setzero_pd();
      acc1[q] = _mm256_setzero_pd();
    }
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
      const __m256d va0 = _mm256_loadu_pd(a0 + i);
      const __m256d va1 = _mm256_loadu_pd(a1 + i);
      for (int q = 0; q < 6; ++q) {
        const __m256d vb = _mm256_loadu_pd(b + static_cast<std::size_t>(q) * ldb + i);
        acc0[q] = _mm256_fmadd_pd(va0, vb, acc0[q]);
        acc1[q] = _mm256_fmadd_pd(va1, vb, acc1[q]);
      }
    }
    for (int q = 0; q < 6; ++q) {
      double s0 = hsum(acc0[q]);
      double s1 = hsum(acc1[q]);
      const double* bq = b + static_cast<std::size_t>(q) * ldb;
      for (std::size_t j = i; j < n; ++j) {
        s0 += a0[j] * bq[j];
        s1 += a1[j] * bq[j];
      }
      c[q * 6 + p] += s0;
      c[q * 6 + p + 1] += s1;
    }
  }
}

}  // namespace oedmt::kernels::avx2

#endif  // x86-64
