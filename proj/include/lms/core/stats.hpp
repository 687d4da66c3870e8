#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace lms::stats {

// The seven summary statistics that reduce a variable-length per-course
// vector to a fixed feature block. Conventions:
//   - sd is the sample (n-1) standard deviation; 0 when n < 2.
//   - skewness is the bias-adjusted coefficient G1; 0 when n < 3 or sd == 0.
//   - kurtosis is excess kurtosis G2; 0 when n < 4 or sd == 0.
struct StatSeven {
    double mean = 0.0;
    double median = 0.0;
    double min = 0.0;
    double max = 0.0;
    double sd = 0.0;
    double skewness = 0.0;
    double kurtosis = 0.0;

    std::array<double, 7> values() const { return {mean, median, min, max, sd, skewness, kurtosis}; }
    static const std::array<std::string, 7>& names();
};

StatSeven stat_seven(std::span<const double> x);

double mean(std::span<const double> x);
// Sample (n-1) variance; 0 when n < 2.
double sample_variance(std::span<const double> x);
double sample_sd(std::span<const double> x);
// Population (n) variance.
double population_variance(std::span<const double> x);
double median(std::span<const double> x);

// Pearson correlation; 0 when either side has zero variance (callers that
// need to distinguish that case check variances first).
double pearson(std::span<const double> x, std::span<const double> y);

}  // namespace lms::stats
