#include <vector>

#include "doctest.h"
#include "ntrr/kernels.hpp"
#include "ntrr/rng.hpp"

using namespace ntrr;
using namespace ntrr::kernels;

namespace {

std::vector<double> random_vec(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = 2.0 * rng.uniform() - 1.0;
  return v;
}

struct IsaGuard {
  Isa saved = active().isa;
  ~IsaGuard() { select(saved); }
};

}  // namespace

TEST_CASE("scalar table is always available") {
  CHECK(scalar_table().isa == Isa::scalar);
  IsaGuard guard;
  CHECK(select(Isa::scalar));
  CHECK(active().isa == Isa::scalar);
  CHECK(name(Isa::avx2) == "avx2");
}

TEST_CASE("selecting an unavailable variant keeps the current one") {
  IsaGuard guard;
  select(Isa::scalar);
  const Isa missing = best_available() == Isa::avx2 ? Isa::neon : Isa::avx2;
  CHECK_FALSE(select(missing));
  CHECK(active().isa == Isa::scalar);
}

TEST_CASE("SIMD kernels match the scalar reference") {
  const KernelTable* simd = simd_table();
  if (simd == nullptr) {
    MESSAGE("no SIMD variant on this build/CPU");
    return;
  }
  const KernelTable& ref = scalar_table();
  Rng rng(1, Rng::stream_id(StreamPurpose::test, 1));
  for (std::size_t n = 0; n <= 67; ++n) {
    const auto a = random_vec(n, rng), b = random_vec(n, rng);
    CHECK(simd->dot(a.data(), b.data(), n) == doctest::Approx(ref.dot(a.data(), b.data(), n)).epsilon(1e-13));
    CHECK(simd->sum(a.data(), n) == doctest::Approx(ref.sum(a.data(), n)).epsilon(1e-13));

    auto y1 = random_vec(n, rng);
    auto y2 = y1;
    ref.axpy(0.37, a.data(), y1.data(), n);
    simd->axpy(0.37, a.data(), y2.data(), n);
    for (std::size_t i = 0; i < n; ++i) CHECK(y2[i] == doctest::Approx(y1[i]).epsilon(1e-14));

    auto z1 = random_vec(n, rng);
    auto z2 = z1;
    ref.mul_acc(a.data(), b.data(), z1.data(), n);
    simd->mul_acc(a.data(), b.data(), z2.data(), n);
    for (std::size_t i = 0; i < n; ++i) CHECK(z2[i] == doctest::Approx(z1[i]).epsilon(1e-14));
  }
}

TEST_CASE("gemm variants match triple loops under every ISA") {
  IsaGuard guard;
  Rng rng(2, Rng::stream_id(StreamPurpose::test, 2));
  std::vector<Isa> isas{Isa::scalar};
  if (simd_table() != nullptr) isas.push_back(simd_table()->isa);
  for (Isa isa : isas) {
    REQUIRE(select(isa));
    for (int trial = 0; trial < 20; ++trial) {
      const std::size_t m = 1 + rng.below(7), k = 1 + rng.below(9), n = 1 + rng.below(11);
      const auto a = random_vec(m * k, rng), b = random_vec(k * n, rng), bt = random_vec(n * k, rng),
                 am = random_vec(m * n, rng);
      std::vector<double> c(m * n, 0.0), oracle(m * n, 0.0);
      gemm_nn(a.data(), b.data(), c.data(), m, k, n);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j)
          for (std::size_t p = 0; p < k; ++p) oracle[i * n + j] += a[i * k + p] * b[p * n + j];
      for (std::size_t i = 0; i < m * n; ++i) CHECK(c[i] == doctest::Approx(oracle[i]).epsilon(1e-12));

      std::fill(c.begin(), c.end(), 0.0);
      std::fill(oracle.begin(), oracle.end(), 0.0);
      gemm_nt(a.data(), bt.data(), c.data(), m, k, n);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j)
          for (std::size_t p = 0; p < k; ++p) oracle[i * n + j] += a[i * k + p] * bt[j * k + p];
      for (std::size_t i = 0; i < m * n; ++i) CHECK(c[i] == doctest::Approx(oracle[i]).epsilon(1e-12));

      std::vector<double> ct(k * n, 0.0), oracle_t(k * n, 0.0);
      gemm_tn(a.data(), am.data(), ct.data(), m, k, n);
      for (std::size_t p = 0; p < k; ++p)
        for (std::size_t j = 0; j < n; ++j)
          for (std::size_t i = 0; i < m; ++i) oracle_t[p * n + j] += a[i * k + p] * am[i * n + j];
      for (std::size_t i = 0; i < k * n; ++i) CHECK(ct[i] == doctest::Approx(oracle_t[i]).epsilon(1e-12));
    }
  }
}
