#include "lms/core/stats.hpp"

#include <algorithm>
#include <cmath>

#include "lms/kernels/kernels.hpp"

namespace lms::stats {

const std::array<std::string, 7>& StatSeven::names() {
    static const std::array<std::string, 7> kNames = {"mean", "median", "min",  "max",
                                                      "sd",   "skew",   "kurt"};
    return kNames;
}

double mean(std::span<const double> x) {
    return x.empty() ? 0.0 : kern::sum(x) / static_cast<double>(x.size());
}

double sample_variance(std::span<const double> x) {
    const std::size_t n = x.size();
    if (n < 2) return 0.0;
    const double m = mean(x);
    return kern::sumsq_dev(x, m) / static_cast<double>(n - 1);
}

double sample_sd(std::span<const double> x) { return std::sqrt(sample_variance(x)); }

double population_variance(std::span<const double> x) {
    const std::size_t n = x.size();
    if (n == 0) return 0.0;
    const double m = mean(x);
    return kern::sumsq_dev(x, m) / static_cast<double>(n);
}

double median(std::span<const double> x) {
    if (x.empty()) return 0.0;
    std::vector<double> v(x.begin(), x.end());
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + mid, v.end());
    double hi = v[mid];
    if (v.size() % 2 == 1) return hi;
    std::nth_element(v.begin(), v.begin() + mid - 1, v.begin() + mid);
    return 0.5 * (v[mid - 1] + hi);
}

StatSeven stat_seven(std::span<const double> x) {
    StatSeven s;
    const std::size_t n = x.size();
    if (n == 0) return s;
    s.mean = mean(x);
    s.median = median(x);
    const auto [mn, mx] = std::minmax_element(x.begin(), x.end());
    s.min = *mn;
    s.max = *mx;
    if (n < 2) return s;

    double m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (double v : x) {
        const double d = v - s.mean;
        const double d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    const double dn = static_cast<double>(n);
    s.sd = std::sqrt(m2 / (dn - 1.0));
    m2 /= dn;
    m3 /= dn;
    m4 /= dn;
    if (m2 <= 0.0) return s;

    if (n >= 3) {
        const double g1 = m3 / std::pow(m2, 1.5);
        s.skewness = g1 * std::sqrt(dn * (dn - 1.0)) / (dn - 2.0);
    }
    if (n >= 4) {
        const double g2 = m4 / (m2 * m2) - 3.0;
        s.kurtosis = ((dn + 1.0) * g2 + 6.0) * (dn - 1.0) / ((dn - 2.0) * (dn - 3.0));
    }
    return s;
}

double pearson(std::span<const double> x, std::span<const double> y) {
    const std::size_t n = std::min(x.size(), y.size());
    if (n < 2) return 0.0;
    const double mx = mean(x.subspan(0, n));
    const double my = mean(y.subspan(0, n));
    double sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) sxy += (x[i] - mx) * (y[i] - my);
    const double sxx = kern::sumsq_dev(x.subspan(0, n), mx);
    const double syy = kern::sumsq_dev(y.subspan(0, n), my);
    if (sxx <= 0.0 || syy <= 0.0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

}  // namespace lms::stats
