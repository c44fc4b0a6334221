#pragma once

// Dense double-precision inner loops used by the tensor engine and the
// message-passing code. Every kernel has a portable scalar reference and,
// on x86-64, an AVX2/FMA variant. The variant is chosen once at startup
// from CPUID and can be overridden with GNNINJECT_ISA=scalar|avx2.

#include <cstddef>
#include <string_view>

namespace gnninject::simd {

enum class Isa { kScalar, kAvx2 };

struct Kernels {
  Isa isa;
  const char* name;
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // C[m x n] += A[m x k] * B[k x n]; row-major with leading dimensions.
  void (*gemm)(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
               const double* b, std::size_t ldb, double* c, std::size_t ldc);
};

const Kernels& scalar_kernels();

/// nullptr when the binary or the CPU lacks AVX2+FMA.
const Kernels* avx2_kernels();

const Kernels& active();

/// Switch the active table. Throws UsageError if the ISA is unavailable.
void select(Isa isa);

Isa parse_isa(std::string_view name);

}  // namespace gnninject::simd
