#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace lms::cluster {

// Dynamic-time-warping distance between equal-length sequences: square root
// of the minimal accumulated squared local cost over monotone alignment
// paths inside a Sakoe-Chiba band of half-width `band` (symmetric step
// pattern). band >= length-1 removes the constraint.
double dtw_distance(std::span<const double> a, std::span<const double> b, int band);

// DTW barycenter averaging: repeatedly align members to the current center
// and replace each coordinate by the mean of the values aligned to it. Total
// DTW cost is non-increasing per iteration.
std::vector<double> dba_centroid(const std::vector<std::vector<double>>& profiles,
                                 std::vector<double> init, int max_iters, int band);

struct ClusterModel {
    std::size_t k = 0;
    std::vector<std::vector<double>> centroids;
    std::vector<int> labels;  // -1 for rows excluded by `valid`
    double bic = 0.0;
    std::uint64_t seed = 0;
};

// X-means over DTW distance: recursive 2-means splitting, a split kept only
// when the children's spherical-Gaussian BIC (k*(dims+1) free parameters)
// beats the parent's. Deterministic given the seed.
ClusterModel xmeans(const std::vector<std::vector<double>>& profiles,
                    const std::vector<char>& valid, std::size_t kmin, std::size_t kmax, int band,
                    std::uint64_t seed);

struct Chi2Result {
    double statistic = 0.0;
    double df = 0.0;
    double p = 1.0;
    std::vector<std::string> warnings;
};

// Pearson chi-square independence test on the contingency table of two
// categorical vectors; -1 entries are sentinels and their rows are dropped.
Chi2Result chi_square_association(std::span<const int> a, std::span<const int> b);

// Adjusted Rand index over positions where both labelings are >= 0.
double adjusted_rand_index(std::span<const int> a, std::span<const int> b);

}  // namespace lms::cluster
