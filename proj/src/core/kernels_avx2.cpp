// Compiled with -mavx2 -mfma. Only <immintrin.h> and <cstddef> are included
// so no inline library code built for AVX2 can leak into scalar callers.

#include <cstddef>

#include "gnninject/core/kernels.hpp"

#if defined(__x86_64__) && defined(__AVX2__) && defined(__FMA__)
#include <immintrin.h>

namespace gnninject::simd {
namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

double dot(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  __m256d acc2 = _mm256_setzero_pd();
  __m256d acc3 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
    acc2 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 8), _mm256_loadu_pd(b + i + 8), acc2);
    acc3 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 12), _mm256_loadu_pd(b + i + 12), acc3);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  }
  double s = hsum(_mm256_add_pd(_mm256_add_pd(acc0, acc1), _mm256_add_pd(acc2, acc3)));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    _mm256_storeu_pd(y + i + 4,
                     _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4)));
  }
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

constexpr std::size_t kBlockK = 256;
constexpr int kMaxRows = 6;

// R rows of C by (4 * NV) columns, accumulated over kc steps of k. When
// Masked, the last vector only touches the lanes enabled in `tail`.
template <int R, int NV, bool Masked>
inline void micro(std::size_t kc, const double* a, std::size_t lda, const double* b,
                  std::size_t ldb, double* c, std::size_t ldc, __m256i tail) {
  __m256d acc[R][NV];
  for (int r = 0; r < R; ++r) {
    for (int v = 0; v < NV; ++v) {
      const double* src = c + r * ldc + 4 * v;
      acc[r][v] = (Masked && v == NV - 1) ? _mm256_maskload_pd(src, tail) : _mm256_loadu_pd(src);
    }
  }
  for (std::size_t p = 0; p < kc; ++p) {
    __m256d bv[NV];
    for (int v = 0; v < NV; ++v) {
      const double* src = b + p * ldb + 4 * v;
      bv[v] = (Masked && v == NV - 1) ? _mm256_maskload_pd(src, tail) : _mm256_loadu_pd(src);
    }
    for (int r = 0; r < R; ++r) {
      const __m256d av = _mm256_broadcast_sd(a + r * lda + p);
      for (int v = 0; v < NV; ++v) acc[r][v] = _mm256_fmadd_pd(av, bv[v], acc[r][v]);
    }
  }
  for (int r = 0; r < R; ++r) {
    for (int v = 0; v < NV; ++v) {
      double* dst = c + r * ldc + 4 * v;
      if (Masked && v == NV - 1) {
        _mm256_maskstore_pd(dst, tail, acc[r][v]);
      } else {
        _mm256_storeu_pd(dst, acc[r][v]);
      }
    }
  }
}

template <int NV, bool Masked>
inline void row_panel(std::size_t m, std::size_t kc, const double* a, std::size_t lda,
                      const double* b, std::size_t ldb, double* c, std::size_t ldc, __m256i tail) {
  std::size_t i = 0;
  for (; i + kMaxRows <= m; i += kMaxRows) {
    micro<kMaxRows, NV, Masked>(kc, a + i * lda, lda, b, ldb, c + i * ldc, ldc, tail);
  }
  const double* ar = a + i * lda;
  double* cr = c + i * ldc;
  switch (m - i) {
    case 5: micro<5, NV, Masked>(kc, ar, lda, b, ldb, cr, ldc, tail); break;
    case 4: micro<4, NV, Masked>(kc, ar, lda, b, ldb, cr, ldc, tail); break;
    case 3: micro<3, NV, Masked>(kc, ar, lda, b, ldb, cr, ldc, tail); break;
    case 2: micro<2, NV, Masked>(kc, ar, lda, b, ldb, cr, ldc, tail); break;
    case 1: micro<1, NV, Masked>(kc, ar, lda, b, ldb, cr, ldc, tail); break;
    default: break;
  }
}

void gemm(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
          const double* b, std::size_t ldb, double* c, std::size_t ldc) {
  const __m256i all = _mm256_set1_epi64x(-1);
  for (std::size_t k0 = 0; k0 < k; k0 += kBlockK) {
    const std::size_t kc = (k - k0 < kBlockK) ? k - k0 : kBlockK;
    const double* ak = a + k0;
    const double* bk = b + k0 * ldb;
    std::size_t j = 0;
    for (; j + 8 <= n; j += 8) row_panel<2, false>(m, kc, ak, lda, bk + j, ldb, c + j, ldc, all);
    if (j + 4 <= n) {
      row_panel<1, false>(m, kc, ak, lda, bk + j, ldb, c + j, ldc, all);
      j += 4;
    }
    if (j < n) {
      const long long rem = static_cast<long long>(n - j);
      const __m256i tail = _mm256_set_epi64x(rem > 3 ? -1 : 0, rem > 2 ? -1 : 0,
                                             rem > 1 ? -1 : 0, rem > 0 ? -1 : 0);
      row_panel<1, true>(m, kc, ak, lda, bk + j, ldb, c + j, ldc, tail);
    }
  }
}

}  // namespace

const Kernels* avx2_kernels_impl() {
  static const Kernels table{Isa::kAvx2, "avx2", &dot, &axpy, &gemm};
  return &table;
}

}  // namespace gnninject::simd

#else

namespace gnninject::simd {
const Kernels* avx2_kernels_impl() { return nullptr; }
}  // namespace gnninject::simd

#endif
