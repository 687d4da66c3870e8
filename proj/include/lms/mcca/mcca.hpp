#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace lms::mcca {

// One standardized feature block. Standardization parameters are retained so
// held-out rows can be projected consistently.
struct FeatureGroup {
    std::string name;
    std::vector<std::string> columns;
    Eigen::MatrixXd data;  // standardized: column mean 0, sample sd 1
    Eigen::VectorXd col_mean;
    Eigen::VectorXd col_sd;  // 1 substituted for constant columns

    static FeatureGroup standardized(std::string name, std::vector<std::string> columns,
                                     const Eigen::MatrixXd& raw);
};

struct MccaResult {
    std::vector<std::string> group_names;
    std::vector<std::vector<std::string>> group_columns;
    std::vector<Eigen::VectorXd> weights;     // unit L2 norm (or all-zero)
    std::vector<Eigen::VectorXd> col_mean;    // standardization carried over
    std::vector<Eigen::VectorXd> col_sd;
    Eigen::MatrixXd composites;               // n x groups
    Eigen::MatrixXd pairwise_correlation;     // groups x groups
    std::vector<double> penalties;
    std::vector<int> support;                 // nonzero weights per group
    std::vector<double> objective_trace;      // one entry per sweep
    double total_correlation = 0.0;           // sum of |pairwise| above diagonal
};

// Block-coordinate ascent on sum_{i<j} w_i' X_i' X_j w_j with each block
// constrained to ||w||_2 <= 1 and ||w||_1 <= penalty (soft-threshold update,
// the penalized-matrix-decomposition family). Blocks start from their leading
// right singular vector; sweeps stop at relative objective change < 1e-6 or
// max_iters. The largest-magnitude weight of each block is made positive.
MccaResult sparse_mcca(const std::vector<FeatureGroup>& groups,
                       const std::vector<double>& penalties, int max_iters = 25,
                       std::uint64_t seed = 0);

struct GridChoice {
    std::vector<double> penalties;
    double total_correlation = 0.0;
    int total_support = 0;
    bool met_sparsity_screen = false;
    bool fallback = false;  // no candidate met the screen
    MccaResult result;
};

// Picks the penalty vector with the best total pairwise correlation among
// candidates whose combined support is at most half of all columns; ties go
// to the smaller support. Falls back to the best correlation overall (with a
// flag) when nothing passes the screen.
GridChoice mcca_grid_search(const std::vector<FeatureGroup>& groups,
                            const std::vector<std::vector<double>>& penalty_grid,
                            int max_iters = 25, std::uint64_t seed = 0);

// Projects new raw blocks through the stored standardization and weights.
// Blocks must match the training column counts.
Eigen::MatrixXd composite_scores(const MccaResult& result,
                                 const std::vector<Eigen::MatrixXd>& raw_blocks);

}  // namespace lms::mcca
