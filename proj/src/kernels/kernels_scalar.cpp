#include "kernels_impl.hpp"

// Reference kernels. Plain loops, no reassociation tricks: these define the
// semantics the vector variants are tested against.

namespace lms::kern::detail {
namespace {

double sum_scalar(const double* x, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i];
    return acc;
}

double dot_scalar(const double* x, const double* y, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
    return acc;
}

double sumsq_dev_scalar(const double* x, std::size_t n, double center) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = x[i] - center;
        acc += d * d;
    }
    return acc;
}

double sq_dist_scalar(const double* x, const double* y, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = x[i] - y[i];
        acc += d * d;
    }
    return acc;
}

void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

constexpr Ops kScalarOps{
    sum_scalar, dot_scalar, sumsq_dev_scalar, sq_dist_scalar, axpy_scalar, "scalar",
};

}  // namespace

const Ops& scalar_table() { return kScalarOps; }

}  // namespace lms::kern::detail
