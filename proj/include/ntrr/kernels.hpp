#pragma once

// Inner-loop arithmetic kernels. Every kernel has a scalar reference
// implementation; SIMD variants (AVX2+FMA on x86-64, NEON on aarch64) are
// selected once at startup from the CPU's capabilities. NTRR_ISA=scalar in the
// environment forces the reference path.

#include <cstddef>
#include <string_view>

namespace ntrr::kernels {

enum class Isa { scalar, avx2, neon };

struct KernelTable {
  Isa isa;
  // sum_i a[i] * b[i]
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y[i] += alpha * x[i]
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // z[i] += x[i] * y[i]
  void (*mul_acc)(const double* x, const double* y, double* z, std::size_t n);
  // sum_i x[i]
  double (*sum)(const double* x, std::size_t n);
};

const KernelTable& scalar_table();
/// Returns nullptr when the variant was not compiled in or the CPU lacks it.
const KernelTable* simd_table();

/// Currently selected kernels.
const KernelTable& active();
/// Switches the active kernels. Returns false (and keeps the old choice)
/// if `isa` is unavailable on this build or CPU.
bool select(Isa isa);
Isa best_available();
std::string_view name(Isa isa);

// Row-major dense products built on the active kernels. All accumulate into C.

// C[m,n] += A[m,k] * B[k,n]
void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n);
// C[m,n] += A[m,k] * B[n,k]^T
void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n);
// C[k,n] += A[m,k]^T * B[m,n]
void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n);

}  // namespace ntrr::kernels
