#include <algorithm>
#include <cmath>

#include "lms/kernels/kernels.hpp"
#include "lms/predict/predict.hpp"

namespace lms::predict {

const char* to_string(Family f) {
    switch (f) {
        case Family::ElasticNet: return "elastic_net";
        case Family::DecisionTree: return "decision_tree";
        case Family::RandomForest: return "random_forest";
        default: return "gbt";
    }
}

Eigen::VectorXd LinearModel::predict(const Eigen::MatrixXd& X) const {
    return (X * coef).array() + intercept;
}

LinearModel fit_elastic_net(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double alpha,
                            double lambda, int max_sweeps, double tol) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("elastic net: alpha must be in [0,1]");
    if (lambda < 0.0) throw ConfigError("elastic net: lambda must be >= 0");
    if (!X.allFinite() || !y.allFinite()) throw DataError("elastic net: non-finite inputs");
    const Eigen::Index n = X.rows();
    const Eigen::Index p = X.cols();
    if (n < 2) throw DataError("elastic net: need at least 2 rows");

    // Standardize columns to mean 0, population sd 1; constant columns stay 0.
    Eigen::VectorXd mean = X.colwise().mean();
    Eigen::VectorXd sd(p);
    Eigen::MatrixXd Z(n, p);
    for (Eigen::Index j = 0; j < p; ++j) {
        Z.col(j) = X.col(j).array() - mean(j);
        const double s = std::sqrt(Z.col(j).squaredNorm() / static_cast<double>(n));
        sd(j) = s;
        if (s > 0.0) Z.col(j) /= s;
        else Z.col(j).setZero();
    }
    const double y_mean = y.mean();
    Eigen::VectorXd residual = y.array() - y_mean;

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    const double dn = static_cast<double>(n);
    const double l1 = lambda * alpha;
    const double l2 = lambda * (1.0 - alpha);
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double max_change = 0.0;
        for (Eigen::Index j = 0; j < p; ++j) {
            if (sd(j) <= 0.0) continue;
            const double rho =
                kern::dot(Z.col(j).data(), residual.data(), static_cast<std::size_t>(n)) / dn +
                beta(j);
            const double soft = std::fabs(rho) > l1 ? std::copysign(std::fabs(rho) - l1, rho) : 0.0;
            const double next = soft / (1.0 + l2);
            const double delta = next - beta(j);
            if (delta != 0.0) {
                kern::axpy(-delta, Z.col(j).data(), residual.data(), static_cast<std::size_t>(n));
                beta(j) = next;
                max_change = std::max(max_change, std::fabs(delta));
            }
        }
        if (max_change < tol) break;
    }

    LinearModel model;
    model.coef = Eigen::VectorXd::Zero(p);
    for (Eigen::Index j = 0; j < p; ++j)
        if (sd(j) > 0.0) model.coef(j) = beta(j) / sd(j);
    model.intercept = y_mean - model.coef.dot(mean);
    return model;
}

EvalResult evaluate(const Eigen::VectorXd& predictions, const Eigen::VectorXd& y) {
    if (predictions.size() != y.size() || y.size() == 0)
        throw DataError("evaluate: size mismatch or empty input");
    const double n = static_cast<double>(y.size());
    const double sse = (predictions - y).squaredNorm();
    const double y_mean = y.mean();
    const double sst = (y.array() - y_mean).square().sum();
    EvalResult res;
    res.rmse = std::sqrt(sse / n);
    if (sst <= 0.0) {
        res.r2_defined = false;
        res.r2 = 0.0;
    } else {
        res.r2 = 1.0 - sse / sst;
    }
    return res;
}

ModelGrids ModelGrids::paper_defaults() {
    ModelGrids g;
    for (int i = 0; i <= 10; ++i) g.elastic_net.alpha.push_back(i / 10.0);
    g.elastic_net.lambda = {1e-4, 1e-3, 1e-2, 1e-1};
    for (int d = 1; d <= 91; d += 10) g.tree.max_depth.push_back(d);
    g.tree.min_leaf = {2, 5, 10};
    for (int i = 0; i < 10; ++i) g.forest.n_trees.push_back(10 + i * 110);
    for (int i = 1; i <= 5; ++i)
        g.gbt.n_trees.push_back(static_cast<int>(std::ceil(1000.0 * (i / 5.0) * (i / 5.0))));
    for (int i = 0; i < 5; ++i)
        g.gbt.learning_rate.push_back(0.001 * std::pow(10.0, i / 4.0));
    g.gbt.max_depth = {3, 7, 15};
    return g;
}

void validate_grids(const ModelGrids& g) {
    for (double a : g.elastic_net.alpha)
        if (!(a >= 0.0 && a <= 1.0))
            throw ConfigError("elastic_net grid: alpha " + std::to_string(a) + " outside [0,1]");
    for (double l : g.elastic_net.lambda)
        if (l < 0.0) throw ConfigError("elastic_net grid: negative lambda");
    for (int d : g.tree.max_depth)
        if (d < 1 || d > 100)
            throw ConfigError("tree grid: max_depth " + std::to_string(d) + " outside [1,100]");
    for (int m : g.tree.min_leaf)
        if (m < 1) throw ConfigError("tree grid: min_leaf must be >= 1");
    for (int t : g.forest.n_trees)
        if (t < 1 || t > 1000)
            throw ConfigError("forest grid: n_trees " + std::to_string(t) + " outside [1,1000]");
    for (int t : g.gbt.n_trees)
        if (t < 1 || t > 1000)
            throw ConfigError("gbt grid: n_trees " + std::to_string(t) + " outside [1,1000]");
    for (double lr : g.gbt.learning_rate)
        if (lr <= 0.0) throw ConfigError("gbt grid: learning_rate must be > 0");
    for (int d : g.gbt.max_depth)
        if (d < 1 || d > 15)
            throw ConfigError("gbt grid: max_depth " + std::to_string(d) + " outside [1,15]");
}

}  // namespace lms::predict
