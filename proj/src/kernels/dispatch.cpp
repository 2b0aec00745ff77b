#include <cstdlib>
#include <cstring>

#include "kernels_impl.hpp"

namespace ntrr::kernels {
namespace {

const KernelTable* initial_table() {
  const char* forced = std::getenv("NTRR_ISA");
  if (forced != nullptr && std::strcmp(forced, "scalar") == 0) return &scalar_table();
  if (const KernelTable* simd = simd_table()) return simd;
  return &scalar_table();
}

const KernelTable*& current() {
  static const KernelTable* table = initial_table();
  return table;
}

}  // namespace

const KernelTable* simd_table() {
#if defined(NTRR_HAVE_AVX2)
  static const KernelTable* table = detail::avx2_table_if_supported();
  return table;
#elif defined(NTRR_HAVE_NEON)
  return detail::neon_table();
#else
  return nullptr;
#endif
}

const KernelTable& active() { return *current(); }

bool select(Isa isa) {
  if (isa == Isa::scalar) {
    current() = &scalar_table();
    return true;
  }
  const KernelTable* simd = simd_table();
  if (simd == nullptr || simd->isa != isa) return false;
  current() = simd;
  return true;
}

Isa best_available() {
  const KernelTable* simd = simd_table();
  return simd != nullptr ? simd->isa : Isa::scalar;
}

std::string_view name(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return "scalar";
    case Isa::avx2:
      return "avx2";
    case Isa::neon:
      return "neon";
  }
  return "unknown";
}

void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  const auto axpy = active().axpy;
  for (std::size_t i = 0; i < m; ++i) {
    double* c_row = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a[i * k + p];
      if (aip != 0.0) axpy(aip, b + p * n, c_row, n);
    }
  }
}

void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  const auto dot = active().dot;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) c[i * n + j] += dot(a + i * k, b + j * k, k);
  }
}

void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  const auto axpy = active().axpy;
  for (std::size_t i = 0; i < m; ++i) {
    const double* b_row = b + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a[i * k + p];
      if (aip != 0.0) axpy(aip, b_row, c + p * n, n);
    }
  }
}

}  // namespace ntrr::kernels
