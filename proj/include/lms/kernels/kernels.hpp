#pragma once

#include <cstddef>
#include <span>
#include <string_view>

// Data-parallel primitives used by the numeric hot loops (summary statistics,
// correlation scans, coordinate descent, residual updates, distance scans).
//
// Every primitive has a scalar reference implementation and, on x86-64, an
// AVX2/FMA variant. The active variant is selected once at runtime from CPU
// capabilities; set_backend() overrides the choice (used by the equivalence
// tests and the CLI's --kernels flag). Vector variants reassociate additions,
// so results may differ from the scalar reference in the last few ulps; the
// equivalence suite pins the tolerance.

namespace lms::kern {

enum class Backend {
    Auto,    // detect at runtime (AVX2 if the CPU has it)
    Scalar,  // portable reference
    Avx2,    // x86-64 AVX2 + FMA
};

struct Ops {
    // sum(x[0..n))
    double (*sum)(const double* x, std::size_t n);
    // sum(x[i] * y[i])
    double (*dot)(const double* x, const double* y, std::size_t n);
    // sum((x[i] - center)^2)
    double (*sumsq_dev)(const double* x, std::size_t n, double center);
    // sum((x[i] - y[i])^2)
    double (*sq_dist)(const double* x, const double* y, std::size_t n);
    // y[i] += a * x[i]
    void (*axpy)(double a, const double* x, double* y, std::size_t n);
    const char* name;
};

const Ops& scalar_ops();

// Active dispatch table (never null).
const Ops& ops();

// Override or restore automatic selection. Returns the backend actually in
// effect (asking for Avx2 on a CPU without it falls back to Scalar).
Backend set_backend(Backend b);
Backend active_backend();
std::string_view backend_name();
bool avx2_available();

inline double sum(const double* x, std::size_t n) { return ops().sum(x, n); }
inline double dot(const double* x, const double* y, std::size_t n) { return ops().dot(x, y, n); }
inline double sumsq_dev(const double* x, std::size_t n, double center) {
    return ops().sumsq_dev(x, n, center);
}
inline double sq_dist(const double* x, const double* y, std::size_t n) {
    return ops().sq_dist(x, y, n);
}
inline void axpy(double a, const double* x, double* y, std::size_t n) { ops().axpy(a, x, y, n); }

inline double sum(std::span<const double> x) { return sum(x.data(), x.size()); }
inline double dot(std::span<const double> x, std::span<const double> y) {
    return dot(x.data(), y.data(), x.size());
}
inline double sumsq_dev(std::span<const double> x, double center) {
    return sumsq_dev(x.data(), x.size(), center);
}
inline double sq_dist(std::span<const double> x, std::span<const double> y) {
    return sq_dist(x.data(), y.data(), x.size());
}

inline double mean(std::span<const double> x) {
    return x.empty() ? 0.0 : sum(x) / static_cast<double>(x.size());
}

}  // namespace lms::kern
