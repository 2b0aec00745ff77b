#pragma once

#include "ntrr/kernels.hpp"

namespace ntrr::kernels::detail {

#if defined(NTRR_HAVE_AVX2)
const KernelTable* avx2_table_if_supported();
#endif
#if defined(NTRR_HAVE_NEON)
const KernelTable* neon_table();
#endif

}  // namespace ntrr::kernels::detail
