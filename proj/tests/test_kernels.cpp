#include <doctest.h>

#include <cmath>
#include <vector>

#include "lms/core/rng.hpp"
#include "lms/kernels/kernels.hpp"

using namespace lms;

namespace {

std::vector<double> random_vec(std::size_t n, std::uint64_t seed) {
    rng::Rng r(seed);
    std::vector<double> v(n);
    for (auto& x : v) x = r.uniform(-3.0, 3.0);
    return v;
}

struct BackendGuard {
    ~BackendGuard() { kern::set_backend(kern::Backend::Auto); }
};

}  // namespace

TEST_SUITE("kernels") {

TEST_CASE("scalar reference basics") {
    BackendGuard guard;
    kern::set_backend(kern::Backend::Scalar);
    std::vector<double> ones(17, 1.0);
    CHECK(kern::sum(ones.data(), ones.size()) == doctest::Approx(17.0));
    std::vector<double> x{1, 2, 3}, y{4, 5, 6};
    CHECK(kern::dot(x.data(), y.data(), 3) == doctest::Approx(32.0));
    CHECK(kern::sumsq_dev(x.data(), 3, 2.0) == doctest::Approx(2.0));
    CHECK(kern::sq_dist(x.data(), y.data(), 3) == doctest::Approx(27.0));
    std::vector<double> acc{1, 1, 1};
    kern::axpy(2.0, x.data(), acc.data(), 3);
    CHECK(acc[0] == doctest::Approx(3.0));
    CHECK(acc[2] == doctest::Approx(7.0));
}

TEST_CASE("vector variants match the scalar reference on every tail shape") {
    if (!kern::avx2_available()) {
        MESSAGE("AVX2 not available on this CPU; dispatch falls back to scalar");
        return;
    }
    BackendGuard guard;
    const auto& scalar = kern::scalar_ops();
    kern::set_backend(kern::Backend::Avx2);
    REQUIRE(kern::backend_name() == "avx2");
    const auto& simd = kern::ops();

    for (std::size_t n : {0u, 1u, 2u, 3u, 4u, 5u, 7u, 8u, 9u, 15u, 16u, 31u, 100u, 1037u}) {
        const auto x = random_vec(n, 100 + n);
        const auto y = random_vec(n, 200 + n);
        const double tol = 1e-12 * (1.0 + static_cast<double>(n));
        CHECK(simd.sum(x.data(), n) == doctest::Approx(scalar.sum(x.data(), n)).epsilon(tol));
        CHECK(simd.dot(x.data(), y.data(), n) ==
              doctest::Approx(scalar.dot(x.data(), y.data(), n)).epsilon(tol));
        CHECK(simd.sumsq_dev(x.data(), n, 0.25) ==
              doctest::Approx(scalar.sumsq_dev(x.data(), n, 0.25)).epsilon(tol));
        CHECK(simd.sq_dist(x.data(), y.data(), n) ==
              doctest::Approx(scalar.sq_dist(x.data(), y.data(), n)).epsilon(tol));
        auto a1 = x, a2 = x;
        scalar.axpy(1.7, y.data(), a1.data(), n);
        simd.axpy(1.7, y.data(), a2.data(), n);
        for (std::size_t i = 0; i < n; ++i) CHECK(a1[i] == doctest::Approx(a2[i]));
    }
}

TEST_CASE("backend selection and override") {
    BackendGuard guard;
    kern::set_backend(kern::Backend::Scalar);
    CHECK(kern::backend_name() == "scalar");
    kern::set_backend(kern::Backend::Auto);
    if (kern::avx2_available()) CHECK(kern::backend_name() == "avx2");
    else CHECK(kern::backend_name() == "scalar");
}

TEST_CASE("dot against unrolled reference on random sizes") {
    rng::Rng r(7);
    for (int rep = 0; rep < 20; ++rep) {
        const std::size_t n = static_cast<std::size_t>(r.uniform_int(1, 257));
        const auto x = random_vec(n, 300 + rep);
        const auto y = random_vec(n, 400 + rep);
        long double ref = 0.0L;
        for (std::size_t i = 0; i < n; ++i) ref += static_cast<long double>(x[i]) * y[i];
        CHECK(kern::dot(x.data(), y.data(), n) ==
              doctest::Approx(static_cast<double>(ref)).epsilon(1e-10));
    }
}

}  // TEST_SUITE
