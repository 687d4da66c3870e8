#include <atomic>

#include "kernels_impl.hpp"

namespace lms::kern {
namespace {

bool cpu_has_avx2() {
#if defined(LMS_HAVE_AVX2) && defined(__GNUC__)
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

const Ops* resolve(Backend b) {
    switch (b) {
        case Backend::Scalar:
            return &detail::scalar_table();
        case Backend::Avx2:
#if defined(LMS_HAVE_AVX2)
            if (cpu_has_avx2()) return &detail::avx2_table();
#endif
            return &detail::scalar_table();
        case Backend::Auto:
        default:
#if defined(LMS_HAVE_AVX2)
            if (cpu_has_avx2()) return &detail::avx2_table();
#endif
            return &detail::scalar_table();
    }
}

std::atomic<const Ops*> g_active{nullptr};

const Ops* active_ptr() {
    const Ops* p = g_active.load(std::memory_order_acquire);
    if (!p) {
        p = resolve(Backend::Auto);
        g_active.store(p, std::memory_order_release);
    }
    return p;
}

}  // namespace

const Ops& scalar_ops() { return detail::scalar_table(); }

const Ops& ops() { return *active_ptr(); }

Backend set_backend(Backend b) {
    g_active.store(resolve(b), std::memory_order_release);
    return active_backend();
}

Backend active_backend() {
#if defined(LMS_HAVE_AVX2)
    if (active_ptr() == &detail::avx2_table()) return Backend::Avx2;
#endif
    return Backend::Scalar;
}

std::string_view backend_name() { return active_ptr()->name; }

bool avx2_available() { return cpu_has_avx2(); }

}  // namespace lms::kern
