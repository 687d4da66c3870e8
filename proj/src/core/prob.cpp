#include "lms/core/prob.hpp"

#include <algorithm>
#include <vector>

namespace lms::prob {

double ks_uniform_pvalue(std::span<const double> values) {
    const std::size_t n = values.size();
    if (n == 0) return 1.0;
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    double d = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double cdf = std::min(std::max(sorted[i], 0.0), 1.0);
        const double hi = (static_cast<double>(i) + 1.0) / static_cast<double>(n) - cdf;
        const double lo = cdf - static_cast<double>(i) / static_cast<double>(n);
        d = std::max({d, hi, lo});
    }
    return kolmogorov_sf(std::sqrt(static_cast<double>(n)) * d);
}

}  // namespace lms::prob
