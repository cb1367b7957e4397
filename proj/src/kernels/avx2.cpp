// Compiled with -mavx2 -mfma. Only reached after a runtime CPU check.

#include <immintrin.h>

#include <algorithm>
#include <cstddef>

#include "eqte/kernels.hpp"

namespace eqte::kernels {
namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4),
                           _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4)
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void row_dot_avx2(const double* rows, std::size_t n, std::size_t p,
                  const double* coef, double* out) {
  if (p == 4) {
    // Common case (intercept, treatment, two covariates): one register/row.
    const __m256d c = _mm256_loadu_pd(coef);
    for (std::size_t i = 0; i < n; ++i)
      out[i] = hsum(_mm256_mul_pd(_mm256_loadu_pd(rows + 4 * i), c));
    return;
  }
  for (std::size_t i = 0; i < n; ++i) out[i] = dot_avx2(rows + i * p, coef, p);
}

__m256i tail_mask(std::size_t count) {
  const long long on = -1;
  return _mm256_setr_epi64x(count > 0 ? on : 0, count > 1 ? on : 0, count > 2 ? on : 0,
                            count > 3 ? on : 0);
}

// 4x4 output tiles held in registers across all rows; lower tiles mirrored.
void weighted_gram_avx2(const double* rows, std::size_t n, std::size_t p,
                        const double* weights, double* acc) {
  for (std::size_t bb = 0; bb < p; bb += 4) {
    const std::size_t bw = std::min<std::size_t>(4, p - bb);
    const __m256i mask = tail_mask(bw);
    for (std::size_t aa = 0; aa <= bb; aa += 4) {
      const std::size_t aw = std::min<std::size_t>(4, p - aa);
      __m256d c0 = _mm256_setzero_pd(), c1 = c0, c2 = c0, c3 = c0;
      for (std::size_t i = 0; i < n; ++i) {
        const double* x = rows + i * p;
        const double w = weights[i];
        const __m256d xb = _mm256_maskload_pd(x + bb, mask);
        c0 = _mm256_fmadd_pd(_mm256_set1_pd(w * x[aa]), xb, c0);
        if (aw > 1) c1 = _mm256_fmadd_pd(_mm256_set1_pd(w * x[aa + 1]), xb, c1);
        if (aw > 2) c2 = _mm256_fmadd_pd(_mm256_set1_pd(w * x[aa + 2]), xb, c2);
        if (aw > 3) c3 = _mm256_fmadd_pd(_mm256_set1_pd(w * x[aa + 3]), xb, c3);
      }
      alignas(32) double tile[4][4];
      _mm256_store_pd(tile[0], c0);
      _mm256_store_pd(tile[1], c1);
      _mm256_store_pd(tile[2], c2);
      _mm256_store_pd(tile[3], c3);
      for (std::size_t r = 0; r < aw; ++r)
        for (std::size_t c = 0; c < bw; ++c) {
          acc[(aa + r) * p + bb + c] += tile[r][c];
          if (aa != bb) acc[(bb + c) * p + aa + r] += tile[r][c];
        }
    }
  }
}

double check_loss_avx2(const double* r, std::size_t n, double tau) {
  const __m256d t = _mm256_set1_pd(tau);
  const __m256d tm1 = _mm256_set1_pd(tau - 1.0);
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d v = _mm256_loadu_pd(r + i);
    acc = _mm256_add_pd(acc, _mm256_max_pd(_mm256_mul_pd(t, v),
                                           _mm256_mul_pd(tm1, v)));
  }
  double s = hsum(acc);
  for (; i < n; ++i) s += std::max(tau * r[i], (tau - 1.0) * r[i]);
  return s;
}

}  // namespace

const KernelTable* avx2_table() {
  static const KernelTable table{dot_avx2, row_dot_avx2, weighted_gram_avx2,
                                 check_loss_avx2};
  return &table;
}

}  // namespace eqte::kernels
