#include <algorithm>
#include <cmath>
#include <numeric>

#include "lms/core/rng.hpp"
#include "lms/predict/predict.hpp"

namespace lms::predict {

Presorted Presorted::build(const Eigen::MatrixXd& X) {
    Presorted p;
    const int n = static_cast<int>(X.rows());
    const int nf = static_cast<int>(X.cols());
    p.order.resize(nf);
    std::vector<int> base(n);
    std::iota(base.begin(), base.end(), 0);
    for (int f = 0; f < nf; ++f) {
        p.order[f] = base;
        const double* col = X.col(f).data();
        std::stable_sort(p.order[f].begin(), p.order[f].end(),
                         [col](int a, int b) { return col[a] < col[b]; });
    }
    return p;
}

namespace {

struct NodeTask {
    int node = 0;
    int begin = 0;
    int end = 0;  // [begin, end) into every feature's index array
    int depth = 0;
    double weight = 0.0;
    double wsum_y = 0.0;
};

struct BestSplit {
    int feature = -1;
    double threshold = 0.0;
    double gain = -1.0;
};

}  // namespace

RegressionTree RegressionTree::fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                   const std::vector<double>& weights, const Presorted& presorted,
                                   const TreeOptions& opts, std::uint64_t rng_stream) {
    const int nf = static_cast<int>(X.cols());
    rng::Rng rng(rng_stream, "tree-mtry");

    // Active rows in presorted order, one array per feature; node ranges stay
    // aligned across features because splits partition every array stably.
    std::vector<std::vector<int>> idx(nf);
    double root_w = 0.0, root_wy = 0.0;
    for (int f = 0; f < nf; ++f) {
        idx[f].reserve(X.rows());
        for (int r : presorted.order[f])
            if (weights[r] > 0.0) idx[f].push_back(r);
    }
    for (int r = 0; r < static_cast<int>(X.rows()); ++r) {
        root_w += weights[r];
        root_wy += weights[r] * y(r);
    }

    RegressionTree tree;
    if (idx.empty() || idx[0].empty() || root_w <= 0.0) {
        tree.nodes_.push_back({-1, 0.0, 0.0, -1, -1});
        return tree;
    }

    std::vector<int> scratch(idx[0].size());
    std::vector<char> go_left(X.rows(), 0);
    std::vector<int> features(nf);
    std::iota(features.begin(), features.end(), 0);

    tree.nodes_.push_back({});
    std::vector<NodeTask> stack{
        {0, 0, static_cast<int>(idx[0].size()), 0, root_w, root_wy}};

    while (!stack.empty()) {
        const NodeTask task = stack.back();
        stack.pop_back();
        Node& node = tree.nodes_[task.node];
        node.value = task.wsum_y / task.weight;

        const double min_leaf = static_cast<double>(opts.min_leaf);
        if (task.depth >= opts.max_depth || task.weight < 2.0 * min_leaf) continue;

        // Feature subset for this node.
        int tried = nf;
        if (opts.mtry > 0 && opts.mtry < nf) {
            tried = opts.mtry;
            for (int i = 0; i < tried; ++i) {
                const int j =
                    i + static_cast<int>(rng.uniform_int(0, static_cast<std::int64_t>(nf - i) - 1));
                std::swap(features[i], features[j]);
            }
            std::sort(features.begin(), features.begin() + tried);
        }

        BestSplit best;
        for (int t = 0; t < tried; ++t) {
            const int f = features[t];
            const double* col = X.col(f).data();
            const std::vector<int>& rows = idx[f];
            double wl = 0.0, sl = 0.0;
            for (int i = task.begin; i + 1 < task.end; ++i) {
                const int r = rows[i];
                wl += weights[r];
                sl += weights[r] * y(r);
                const double v = col[r];
                const double v_next = col[rows[i + 1]];
                if (v_next <= v) continue;  // tie, no cut here
                if (wl < min_leaf || task.weight - wl < min_leaf) continue;
                const double sr = task.wsum_y - sl;
                const double gain = sl * sl / wl + sr * sr / (task.weight - wl);
                if (gain > best.gain + 1e-12) {
                    best = {f, 0.5 * (v + v_next), gain};
                }
            }
        }
        const double base = task.wsum_y * task.wsum_y / task.weight;
        if (best.feature < 0 || best.gain <= base + 1e-12) continue;

        // Stable partition of every feature array by the chosen split.
        const double* split_col = X.col(best.feature).data();
        double wl = 0.0, sl = 0.0;
        for (int i = task.begin; i < task.end; ++i) {
            const int r = idx[best.feature][i];
            const bool left = split_col[r] <= best.threshold;
            go_left[r] = left;
            if (left) {
                wl += weights[r];
                sl += weights[r] * y(r);
            }
        }
        int left_count = 0;
        for (int f = 0; f < nf; ++f) {
            std::vector<int>& rows = idx[f];
            int out_l = task.begin;
            int out_r = 0;
            for (int i = task.begin; i < task.end; ++i) {
                const int r = rows[i];
                if (go_left[r]) rows[out_l++] = r;
                else scratch[out_r++] = r;
            }
            for (int i = 0; i < out_r; ++i) rows[out_l + i] = scratch[i];
            left_count = out_l - task.begin;
        }

        node.feature = best.feature;
        node.threshold = best.threshold;
        node.left = static_cast<int>(tree.nodes_.size());
        node.right = node.left + 1;
        tree.nodes_.push_back({});
        tree.nodes_.push_back({});
        const int mid = task.begin + left_count;
        stack.push_back({tree.nodes_[task.node].right, mid, task.end, task.depth + 1,
                         task.weight - wl, task.wsum_y - sl});
        stack.push_back({tree.nodes_[task.node].left, task.begin, mid, task.depth + 1, wl, sl});
    }
    return tree;
}

double RegressionTree::predict_row(const Eigen::MatrixXd& X, Eigen::Index row) const {
    int i = 0;
    while (nodes_[i].feature >= 0)
        i = X(row, nodes_[i].feature) <= nodes_[i].threshold ? nodes_[i].left : nodes_[i].right;
    return nodes_[i].value;
}

Eigen::VectorXd RegressionTree::predict(const Eigen::MatrixXd& X) const {
    Eigen::VectorXd out(X.rows());
    for (Eigen::Index r = 0; r < X.rows(); ++r) out(r) = predict_row(X, r);
    return out;
}

int RegressionTree::depth() const {
    // Iterative depth over the explicit node structure.
    int max_depth = 0;
    std::vector<std::pair<int, int>> stack{{0, 0}};
    while (!stack.empty()) {
        auto [i, d] = stack.back();
        stack.pop_back();
        max_depth = std::max(max_depth, d);
        if (nodes_[i].feature >= 0) {
            stack.push_back({nodes_[i].left, d + 1});
            stack.push_back({nodes_[i].right, d + 1});
        }
    }
    return max_depth;
}

bool RegressionTree::uses_feature(int feature) const {
    for (const auto& n : nodes_)
        if (n.feature == feature) return true;
    return false;
}

RegressionTree fit_tree(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, int max_depth,
                        int min_leaf) {
    const Presorted presorted = Presorted::build(X);
    std::vector<double> w(X.rows(), 1.0);
    TreeOptions opts;
    opts.max_depth = max_depth;
    opts.min_leaf = min_leaf;
    return RegressionTree::fit(X, y, w, presorted, opts);
}

ForestModel fit_forest(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, int n_trees,
                       std::uint64_t seed, const ForestOptions& opts) {
    if (n_trees < 1) throw ConfigError("fit_forest: n_trees must be >= 1");
    const int n = static_cast<int>(X.rows());
    const int p = static_cast<int>(X.cols());
    const Presorted presorted = Presorted::build(X);

    TreeOptions topts;
    topts.max_depth = opts.max_depth;
    topts.min_leaf = opts.min_leaf;
    topts.mtry = opts.mtry > 0 ? opts.mtry
                               : std::max(1, static_cast<int>(std::floor(std::sqrt(p))));

    ForestModel model;
    model.trees_.reserve(n_trees);
    std::vector<double> w(n, 1.0);
    for (int t = 0; t < n_trees; ++t) {
        if (opts.bootstrap) {
            rng::Rng r(seed, "forest-bootstrap", static_cast<std::uint64_t>(t));
            std::fill(w.begin(), w.end(), 0.0);
            for (int i = 0; i < n; ++i) w[r.uniform_int(0, n - 1)] += 1.0;
        }
        model.trees_.push_back(RegressionTree::fit(
            X, y, w, presorted, topts,
            rng::derive_seed(seed, "forest-tree", static_cast<std::uint64_t>(t))));
    }
    return model;
}

Eigen::VectorXd ForestModel::predict(const Eigen::MatrixXd& X) const {
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(X.rows());
    for (const auto& t : trees_) acc += t.predict(X);
    return acc / static_cast<double>(trees_.size());
}

Eigen::MatrixXd ForestModel::staged_predict(const Eigen::MatrixXd& X,
                                            const std::vector<int>& checkpoints) const {
    Eigen::MatrixXd out(X.rows(), static_cast<Eigen::Index>(checkpoints.size()));
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(X.rows());
    std::size_t next = 0;
    for (std::size_t t = 0; t < trees_.size() && next < checkpoints.size(); ++t) {
        acc += trees_[t].predict(X);
        while (next < checkpoints.size() && checkpoints[next] == static_cast<int>(t) + 1) {
            out.col(static_cast<Eigen::Index>(next)) = acc / static_cast<double>(t + 1);
            ++next;
        }
    }
    return out;
}

GbtModel fit_gbt(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, int n_trees,
                 double learning_rate, int max_depth, const GbtOptions& opts) {
    if (learning_rate <= 0.0) throw ConfigError("fit_gbt: learning_rate must be > 0");
    if (n_trees < 0) throw ConfigError("fit_gbt: n_trees must be >= 0");
    const Presorted presorted = Presorted::build(X);
    std::vector<double> w(X.rows(), 1.0);
    TreeOptions topts;
    topts.max_depth = max_depth;
    topts.min_leaf = opts.min_leaf;

    GbtModel model;
    model.learning_rate_ = learning_rate;
    model.f0_ = X.rows() > 0 ? y.mean() : 0.0;
    Eigen::VectorXd residual = y.array() - model.f0_;
    model.trees_.reserve(n_trees);
    for (int m = 0; m < n_trees; ++m) {
        RegressionTree tree = RegressionTree::fit(X, residual, w, presorted, topts);
        residual -= learning_rate * tree.predict(X);
        model.trees_.push_back(std::move(tree));
        model.train_mse_.push_back(residual.squaredNorm() / static_cast<double>(X.rows()));
    }
    return model;
}

Eigen::VectorXd GbtModel::predict(const Eigen::MatrixXd& X) const {
    Eigen::VectorXd acc = Eigen::VectorXd::Constant(X.rows(), f0_);
    for (const auto& t : trees_) acc += learning_rate_ * t.predict(X);
    return acc;
}

Eigen::MatrixXd GbtModel::staged_predict(const Eigen::MatrixXd& X,
                                         const std::vector<int>& checkpoints) const {
    Eigen::MatrixXd out(X.rows(), static_cast<Eigen::Index>(checkpoints.size()));
    Eigen::VectorXd acc = Eigen::VectorXd::Constant(X.rows(), f0_);
    std::size_t next = 0;
    while (next < checkpoints.size() && checkpoints[next] == 0) {
        out.col(static_cast<Eigen::Index>(next)) = acc;
        ++next;
    }
    for (std::size_t t = 0; t < trees_.size() && next < checkpoints.size(); ++t) {
        acc += learning_rate_ * trees_[t].predict(X);
        while (next < checkpoints.size() && checkpoints[next] == static_cast<int>(t) + 1) {
            out.col(static_cast<Eigen::Index>(next)) = acc;
            ++next;
        }
    }
    return out;
}

}  // namespace lms::predict
