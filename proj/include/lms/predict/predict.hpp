#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lms/core/error.hpp"

namespace lms::predict {

enum class Family { ElasticNet, DecisionTree, RandomForest, Gbt };
const char* to_string(Family f);

// ---------------------------------------------------------------- linear ---

struct LinearModel {
    double intercept = 0.0;
    Eigen::VectorXd coef;  // original feature scale
    Eigen::VectorXd predict(const Eigen::MatrixXd& X) const;
};

// Coordinate-descent minimizer of
//   1/(2n) * ||y - b - X beta||^2 + lambda * (alpha*|beta|_1 + (1-alpha)/2*|beta|_2^2)
// with the penalty applied on internally standardized columns. Stops when the
// largest coefficient change in a sweep is below tol or after max_sweeps.
LinearModel fit_elastic_net(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double alpha,
                            double lambda, int max_sweeps = 10000, double tol = 1e-6);

// ----------------------------------------------------------------- trees ---

// Per-feature row orderings, built once per training matrix and shared by
// every tree grown on it.
struct Presorted {
    std::vector<std::vector<int>> order;  // order[f] = rows sorted by X(., f)
    static Presorted build(const Eigen::MatrixXd& X);
};

struct TreeOptions {
    int max_depth = std::numeric_limits<int>::max();
    int min_leaf = 5;  // minimum weight (sample count) per leaf
    int mtry = 0;      // features scanned per split; 0 = all
};

class RegressionTree {
public:
    struct Node {
        int feature = -1;  // -1 for leaves
        double threshold = 0.0;
        double value = 0.0;
        int left = -1;
        int right = -1;
    };

    // weights: per-row replicate counts (bootstrap); rows with weight 0 are
    // ignored. rng_state seeds the per-node feature subsampling when
    // opts.mtry > 0.
    static RegressionTree fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                              const std::vector<double>& weights, const Presorted& presorted,
                              const TreeOptions& opts, std::uint64_t rng_stream = 0);

    double predict_row(const Eigen::MatrixXd& X, Eigen::Index row) const;
    Eigen::VectorXd predict(const Eigen::MatrixXd& X) const;

    const std::vector<Node>& nodes() const { return nodes_; }
    int depth() const;
    // Does any internal node split on `feature`?
    bool uses_feature(int feature) const;

private:
    std::vector<Node> nodes_;
};

// Greedy least-squares tree on all features, no bootstrap.
RegressionTree fit_tree(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, int max_depth,
                        int min_leaf);

// ---------------------------------------------------------------- forest ---

struct ForestOptions {
    bool bootstrap = true;
    int mtry = 0;  // 0 = floor(sqrt(p))
    int min_leaf = 5;
    int max_depth = std::numeric_limits<int>::max();
};

class ForestModel {
public:
    Eigen::VectorXd predict(const Eigen::MatrixXd& X) const;
    // Column c holds predictions using the first checkpoints[c] trees.
    Eigen::MatrixXd staged_predict(const Eigen::MatrixXd& X,
                                   const std::vector<int>& checkpoints) const;
    std::size_t size() const { return trees_.size(); }
    const RegressionTree& tree(std::size_t i) const { return trees_[i]; }

private:
    friend ForestModel fit_forest(const Eigen::MatrixXd&, const Eigen::VectorXd&, int,
                                  std::uint64_t, const ForestOptions&);
    std::vector<RegressionTree> trees_;
};

// Bootstrap ensemble with per-split feature subsampling; deterministic per
// seed.
ForestModel fit_forest(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, int n_trees,
                       std::uint64_t seed, const ForestOptions& opts = {});

// ------------------------------------------------------------------- gbt ---

struct GbtOptions {
    int min_leaf = 5;
};

class GbtModel {
public:
    Eigen::VectorXd predict(const Eigen::MatrixXd& X) const;
    Eigen::MatrixXd staged_predict(const Eigen::MatrixXd& X,
                                   const std::vector<int>& checkpoints) const;
    const std::vector<double>& train_mse() const { return train_mse_; }  // per stage
    std::size_t stages() const { return trees_.size(); }

private:
    friend GbtModel fit_gbt(const Eigen::MatrixXd&, const Eigen::VectorXd&, int, double, int,
                            const GbtOptions&);
    double f0_ = 0.0;
    double learning_rate_ = 0.1;
    std::vector<RegressionTree> trees_;
    std::vector<double> train_mse_;
};

// Stagewise least-squares boosting from the mean predictor.
GbtModel fit_gbt(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, int n_trees,
                 double learning_rate, int max_depth, const GbtOptions& opts = {});

// ------------------------------------------------------------ evaluation ---

struct EvalResult {
    double r2 = 0.0;
    double rmse = 0.0;
    bool r2_defined = true;  // false when the target has zero variance
};

EvalResult evaluate(const Eigen::VectorXd& predictions, const Eigen::VectorXd& y);

// ----------------------------------------------------------- grid search ---

struct ModelSpec {
    Family family = Family::ElasticNet;
    std::map<std::string, double> params;
    bool operator==(const ModelSpec&) const = default;
};

struct ElasticNetGrid {
    std::vector<double> alpha;
    std::vector<double> lambda;
};
struct TreeGrid {
    std::vector<int> max_depth;
    std::vector<int> min_leaf;
};
struct ForestGrid {
    std::vector<int> n_trees;
};
struct GbtGrid {
    std::vector<int> n_trees;
    std::vector<double> learning_rate;
    std::vector<int> max_depth;
};

struct ModelGrids {
    ElasticNetGrid elastic_net;
    TreeGrid tree;
    ForestGrid forest;
    GbtGrid gbt;

    // The published search spaces: alpha 0..1 by 0.1; depth 1..91 by 10 with
    // min_leaf {2,5,10}; 10 linear steps of 10..1000 trees; quadratic tree
    // counts {40,160,360,640,1000} with 5 log-spaced rates in [0.001, 0.01]
    // and depths {3, 7, 15}.
    static ModelGrids paper_defaults();
};

// Throws ConfigError when a grid point violates the family's bounds.
void validate_grids(const ModelGrids& grids);

struct FoldMetric {
    double r2 = 0.0;
    double rmse = 0.0;
};

struct CvMetrics {
    double r2 = 0.0;
    double rmse = 0.0;
    std::vector<FoldMetric> per_fold;  // 5 outer folds
    ModelSpec chosen_spec;             // modal choice across outer folds
};

// Nested cross-validation: 5 outer folds split by row (student), 3 inner
// folds on each training portion select the hyperparameters by mean
// validation MSE; ties go to the smallest model. Deterministic per seed
// regardless of thread count.
CvMetrics grid_search_cv(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, Family family,
                         const ModelGrids& grids, std::uint64_t seed, int threads = 1);

}  // namespace lms::predict
