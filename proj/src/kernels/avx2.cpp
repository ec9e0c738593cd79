// Compiled with -mavx2 -mfma. Only reached after a CPUID check.

#include <immintrin.h>

#include <cmath>

#include "fastpt/kernels.hpp"

namespace fastpt::kernels {
namespace {

// R rows of C, 16 columns starting at j. Per-element order matches the
// scalar kernel: c = fma(a[p], b[p], c) for p = 0..k-1.
template <int R>
inline void gemm_block16(const float* a, const float* b, float* c, std::size_t k,
                         std::size_t n, std::size_t j, bool accumulate) {
  __m256 lo[R];
  __m256 hi[R];
  for (int r = 0; r < R; ++r) {
    if (accumulate) {
      lo[r] = _mm256_loadu_ps(c + r * n + j);
      hi[r] = _mm256_loadu_ps(c + r * n + j + 8);
    } else {
      lo[r] = _mm256_setzero_ps();
      hi[r] = _mm256_setzero_ps();
    }
  }
  for (std::size_t p = 0; p < k; ++p) {
    const __m256 b0 = _mm256_loadu_ps(b + p * n + j);
    const __m256 b1 = _mm256_loadu_ps(b + p * n + j + 8);
    for (int r = 0; r < R; ++r) {
      const __m256 av = _mm256_broadcast_ss(a + r * k + p);
      lo[r] = _mm256_fmadd_ps(av, b0, lo[r]);
      hi[r] = _mm256_fmadd_ps(av, b1, hi[r]);
    }
  }
  for (int r = 0; r < R; ++r) {
    _mm256_storeu_ps(c + r * n + j, lo[r]);
    _mm256_storeu_ps(c + r * n + j + 8, hi[r]);
  }
}

template <int R>
inline void gemm_block8(const float* a, const float* b, float* c, std::size_t k,
                        std::size_t n, std::size_t j, bool accumulate) {
  __m256 acc[R];
  for (int r = 0; r < R; ++r) {
    acc[r] = accumulate ? _mm256_loadu_ps(c + r * n + j) : _mm256_setzero_ps();
  }
  for (std::size_t p = 0; p < k; ++p) {
    const __m256 bv = _mm256_loadu_ps(b + p * n + j);
    for (int r = 0; r < R; ++r) {
      acc[r] = _mm256_fmadd_ps(_mm256_broadcast_ss(a + r * k + p), bv, acc[r]);
    }
  }
  for (int r = 0; r < R; ++r) _mm256_storeu_ps(c + r * n + j, acc[r]);
}

template <int R>
inline void gemm_rows(const float* a, const float* b, float* c, std::size_t k, std::size_t n,
                      bool accumulate) {
  std::size_t j = 0;
  for (; j + 16 <= n; j += 16) gemm_block16<R>(a, b, c, k, n, j, accumulate);
  for (; j + 8 <= n; j += 8) gemm_block8<R>(a, b, c, k, n, j, accumulate);
  for (; j < n; ++j) {
    for (int r = 0; r < R; ++r) {
      float acc = accumulate ? c[r * n + j] : 0.0F;
      for (std::size_t p = 0; p < k; ++p) acc = std::fma(a[r * k + p], b[p * n + j], acc);
      c[r * n + j] = acc;
    }
  }
}

void gemm_avx2(const float* a, const float* b, float* c, std::size_t m, std::size_t k,
               std::size_t n, bool accumulate) {
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) gemm_rows<4>(a + i * k, b, c + i * n, k, n, accumulate);
  switch (m - i) {
    case 3: gemm_rows<3>(a + i * k, b, c + i * n, k, n, accumulate); break;
    case 2: gemm_rows<2>(a + i * k, b, c + i * n, k, n, accumulate); break;
    case 1: gemm_rows<1>(a + i * k, b, c + i * n, k, n, accumulate); break;
    default: break;
  }
}

void axpy_avx2(std::size_t n, float alpha, const float* x, float* y) {
  const __m256 av = _mm256_set1_ps(alpha);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm256_storeu_ps(y + i, _mm256_fmadd_ps(av, _mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i)));
  }
  for (; i < n; ++i) y[i] = std::fma(alpha, x[i], y[i]);
}

void add_avx2(std::size_t n, const float* x, const float* y, float* out) {
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm256_storeu_ps(out + i, _mm256_add_ps(_mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i)));
  }
  for (; i < n; ++i) out[i] = x[i] + y[i];
}

void mul_avx2(std::size_t n, const float* x, const float* y, float* out) {
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm256_storeu_ps(out + i, _mm256_mul_ps(_mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i)));
  }
  for (; i < n; ++i) out[i] = x[i] * y[i];
}

}  // namespace

const KernelSet& avx2_set() {
  static const KernelSet set{"avx2", gemm_avx2, axpy_avx2, add_avx2, mul_avx2};
  return set;
}

}  // namespace fastpt::kernels
