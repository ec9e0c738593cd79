#pragma once

// Dense float kernels behind the tensor engine.
//
// Every kernel has a scalar reference and, on x86-64, an AVX2+FMA variant.
// Both variants accumulate each output element in the same order and with
// fused multiply-add, so their results are bit-identical. The variant is
// picked once at startup from CPUID; FASTPT_KERNELS=scalar forces the
// reference path.

#include <cstddef>
#include <string_view>

namespace fastpt::kernels {

/// C[m x n] (+)= A[m x k] * B[k x n], all row-major.
/// Each C element is accumulated over k in ascending order.
using GemmFn = void (*)(const float* a, const float* b, float* c, std::size_t m,
                        std::size_t k, std::size_t n, bool accumulate);

/// y[i] = fma(alpha, x[i], y[i])
using AxpyFn = void (*)(std::size_t n, float alpha, const float* x, float* y);

/// out[i] = x[i] + y[i]
using AddFn = void (*)(std::size_t n, const float* x, const float* y, float* out);

/// out[i] = x[i] * y[i]
using MulFn = void (*)(std::size_t n, const float* x, const float* y, float* out);

struct KernelSet {
  std::string_view name;
  GemmFn gemm;
  AxpyFn axpy;
  AddFn add;
  MulFn mul;
};

const KernelSet& scalar();

/// nullptr when the binary or the CPU lacks AVX2+FMA.
const KernelSet* avx2();

/// The set used by the tensor engine.
const KernelSet& active();

/// Overrides the runtime choice (tests and benchmarks). Passing nullptr
/// restores CPU detection.
void force(const KernelSet* set);

void transpose(const float* src, float* dst, std::size_t rows, std::size_t cols);

}  // namespace fastpt::kernels
