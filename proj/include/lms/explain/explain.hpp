#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace lms::explain {

// Batch predictor over a feature matrix (rows = samples).
using PredictFn = std::function<Eigen::VectorXd(const Eigen::MatrixXd&)>;

// Per-feature summary of the training data needed to perturb around a point:
// numeric features get Gaussian noise scaled by their training SD, indicator
// features are resampled from their training marginal.
struct PerturbationModel {
    Eigen::VectorXd sd;           // training SD per feature
    Eigen::VectorXd indicator_p;  // P(feature == 1) for indicator columns
    std::vector<bool> indicator;

    static PerturbationModel from_training(const Eigen::MatrixXd& X,
                                           const std::vector<bool>& indicator);
};

struct LimeOptions {
    std::size_t n_samples = 500;
    double perturb_scale = 0.3;  // noise SD as a fraction of training SD
};

struct FeatureImportance {
    double value = 0.0;      // signed
    double magnitude = 0.0;  // mean absolute local importance
    bool flagged = false;    // zero-variance feature
};

// Correlation between each perturbed feature and the model's predictions in
// the neighborhood of x. Positive values support higher predictions.
std::vector<FeatureImportance> lime_local(const PredictFn& model, const Eigen::VectorXd& x,
                                          const PerturbationModel& perturb,
                                          const LimeOptions& opts, std::uint64_t seed);

struct ImportanceReport {
    std::string scope;   // group descriptor, e.g. "All" or "GPA <= 2"
    std::string method;  // "LIME", "Correlation", "Regression"
    std::vector<std::string> features;
    std::vector<FeatureImportance> per_feature;
};

// Mean of local importances over the rows selected by group_mask; magnitude
// is the mean of absolute local importances.
ImportanceReport lime_global(const PredictFn& model, const Eigen::MatrixXd& X,
                             const std::vector<bool>& group_mask,
                             const std::vector<std::string>& feature_names,
                             const PerturbationModel& perturb, const LimeOptions& opts,
                             std::uint64_t seed, const std::string& scope);

// Per-feature Pearson correlation with the target inside the group.
ImportanceReport correlation_importance(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                        const std::vector<bool>& group_mask,
                                        const std::vector<std::string>& feature_names,
                                        const std::string& scope);

struct RegressionCoefficient {
    std::string name;
    double coefficient = 0.0;
    double std_error = 0.0;
    double p_value = 1.0;
    bool significant = false;  // p < 0.05
};

struct GroupRegression {
    std::string scope;
    std::vector<RegressionCoefficient> coefficients;  // excludes the intercept
    double intercept = 0.0;
    std::vector<std::string> dropped;  // collinear columns removed
};

// Ordinary least squares with intercept on the selected rows; two-sided
// t-based p-values; rank-deficient designs drop the collinear columns with a
// warning instead of failing.
GroupRegression group_regression(const Eigen::MatrixXd& X_subset,
                                 const std::vector<std::string>& names, const Eigen::VectorXd& y,
                                 const std::vector<bool>& group_mask, const std::string& scope);

}  // namespace lms::explain
