#pragma once

#include "lms/kernels/kernels.hpp"

// Internal: per-backend dispatch tables. avx2_ops() exists only when the
// translation unit is built (LMS_HAVE_AVX2).

namespace lms::kern::detail {

const Ops& scalar_table();

#if defined(LMS_HAVE_AVX2)
const Ops& avx2_table();
#endif

}  // namespace lms::kern::detail
