#include <algorithm>
#include <cmath>
#include <map>

#include "lms/core/parallel.hpp"
#include "lms/core/rng.hpp"
#include "lms/predict/predict.hpp"

namespace lms::predict {
namespace {

std::vector<int> make_folds(std::size_t n, int k, rng::Rng& r) {
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    r.shuffle(perm);
    std::vector<int> fold(n);
    for (std::size_t i = 0; i < n; ++i) fold[perm[i]] = static_cast<int>(i % k);
    return fold;
}

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& X, const std::vector<int>& rows) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), X.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = X.row(rows[i]);
    return out;
}

Eigen::VectorXd take(const Eigen::VectorXd& y, const std::vector<int>& rows) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) out(static_cast<Eigen::Index>(i)) = y(rows[i]);
    return out;
}

struct GridPoint {
    ModelSpec spec;
    std::vector<double> size_key;  // lexicographically smaller = smaller model
};

std::vector<GridPoint> enumerate_grid(Family family, const ModelGrids& g) {
    std::vector<GridPoint> out;
    switch (family) {
        case Family::ElasticNet:
            for (double a : g.elastic_net.alpha)
                for (double l : g.elastic_net.lambda)
                    out.push_back({{family, {{"alpha", a}, {"lambda", l}}}, {-l, -a}});
            break;
        case Family::DecisionTree:
            for (int d : g.tree.max_depth)
                for (int m : g.tree.min_leaf)
                    out.push_back({{family,
                                    {{"max_depth", static_cast<double>(d)},
                                     {"min_leaf", static_cast<double>(m)}}},
                                   {static_cast<double>(d), -static_cast<double>(m)}});
            break;
        case Family::RandomForest:
            for (int t : g.forest.n_trees)
                out.push_back(
                    {{family, {{"n_trees", static_cast<double>(t)}}}, {static_cast<double>(t)}});
            break;
        case Family::Gbt:
            for (int t : g.gbt.n_trees)
                for (double lr : g.gbt.learning_rate)
                    for (int d : g.gbt.max_depth)
                        out.push_back({{family,
                                        {{"n_trees", static_cast<double>(t)},
                                         {"learning_rate", lr},
                                         {"max_depth", static_cast<double>(d)}}},
                                       {static_cast<double>(t), static_cast<double>(d), lr}});
            break;
    }
    if (out.empty()) throw ConfigError("grid_search_cv: empty grid");
    return out;
}

double mse(const Eigen::VectorXd& pred, const Eigen::VectorXd& y) {
    return (pred - y).squaredNorm() / static_cast<double>(y.size());
}

Eigen::VectorXd predict_with(const ModelSpec& spec, const Eigen::MatrixXd& Xtr,
                             const Eigen::VectorXd& ytr, const Eigen::MatrixXd& Xte,
                             std::uint64_t seed) {
    switch (spec.family) {
        case Family::ElasticNet:
            return fit_elastic_net(Xtr, ytr, spec.params.at("alpha"), spec.params.at("lambda"))
                .predict(Xte);
        case Family::DecisionTree:
            return fit_tree(Xtr, ytr, static_cast<int>(spec.params.at("max_depth")),
                            static_cast<int>(spec.params.at("min_leaf")))
                .predict(Xte);
        case Family::RandomForest:
            return fit_forest(Xtr, ytr, static_cast<int>(spec.params.at("n_trees")), seed)
                .predict(Xte);
        default:
            return fit_gbt(Xtr, ytr, static_cast<int>(spec.params.at("n_trees")),
                           spec.params.at("learning_rate"),
                           static_cast<int>(spec.params.at("max_depth")))
                .predict(Xte);
    }
}

// Mean validation MSE of every grid point over the inner folds. Ensemble
// families share one maximal fit per fold and read the grid sizes off the
// staged predictions.
std::vector<double> score_grid(Family family, const std::vector<GridPoint>& grid,
                               const ModelGrids& grids, const Eigen::MatrixXd& X,
                               const Eigen::VectorXd& y, const std::vector<int>& inner_fold,
                               int n_inner, std::uint64_t seed) {
    std::vector<double> score(grid.size(), 0.0);
    for (int k = 0; k < n_inner; ++k) {
        std::vector<int> tr, va;
        for (std::size_t i = 0; i < inner_fold.size(); ++i)
            (inner_fold[i] == k ? va : tr).push_back(static_cast<int>(i));
        const Eigen::MatrixXd Xtr = take_rows(X, tr), Xva = take_rows(X, va);
        const Eigen::VectorXd ytr = take(y, tr), yva = take(y, va);

        if (family == Family::RandomForest) {
            std::vector<int> sizes = grids.forest.n_trees;
            std::sort(sizes.begin(), sizes.end());
            const ForestModel forest =
                fit_forest(Xtr, ytr, sizes.back(), rng::derive_seed(seed, "cv-rf", k));
            const Eigen::MatrixXd staged = forest.staged_predict(Xva, sizes);
            for (std::size_t gi = 0; gi < grid.size(); ++gi) {
                const int want = static_cast<int>(grid[gi].spec.params.at("n_trees"));
                const auto pos = std::lower_bound(sizes.begin(), sizes.end(), want) - sizes.begin();
                score[gi] += mse(staged.col(pos), yva);
            }
        } else if (family == Family::Gbt) {
            std::vector<int> sizes = grids.gbt.n_trees;
            std::sort(sizes.begin(), sizes.end());
            for (double lr : grids.gbt.learning_rate)
                for (int depth : grids.gbt.max_depth) {
                    const GbtModel model = fit_gbt(Xtr, ytr, sizes.back(), lr, depth);
                    const Eigen::MatrixXd staged = model.staged_predict(Xva, sizes);
                    for (std::size_t gi = 0; gi < grid.size(); ++gi) {
                        const auto& p = grid[gi].spec.params;
                        if (p.at("learning_rate") != lr ||
                            static_cast<int>(p.at("max_depth")) != depth)
                            continue;
                        const int want = static_cast<int>(p.at("n_trees"));
                        const auto pos =
                            std::lower_bound(sizes.begin(), sizes.end(), want) - sizes.begin();
                        score[gi] += mse(staged.col(pos), yva);
                    }
                }
        } else {
            for (std::size_t gi = 0; gi < grid.size(); ++gi)
                score[gi] += mse(predict_with(grid[gi].spec, Xtr, ytr, Xva,
                                              rng::derive_seed(seed, "cv-point", k)),
                                 yva);
        }
    }
    for (auto& s : score) s /= static_cast<double>(n_inner);
    return score;
}

}  // namespace

CvMetrics grid_search_cv(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, Family family,
                         const ModelGrids& grids, std::uint64_t seed, int threads) {
    validate_grids(grids);
    const auto grid = enumerate_grid(family, grids);
    const std::size_t n = static_cast<std::size_t>(X.rows());
    constexpr int kOuter = 5;
    constexpr int kInner = 3;
    if (n < kOuter) throw DataError("grid_search_cv: need at least 5 rows");

    rng::Rng outer_rng(seed, "cv-outer");
    const std::vector<int> outer_fold = make_folds(n, kOuter, outer_rng);

    std::vector<FoldMetric> per_fold(kOuter);
    std::vector<std::size_t> chosen_idx(kOuter);

    parallel_for(kOuter, threads, [&](std::size_t o) {
        std::vector<int> tr, te;
        for (std::size_t i = 0; i < n; ++i)
            (outer_fold[i] == static_cast<int>(o) ? te : tr).push_back(static_cast<int>(i));
        const Eigen::MatrixXd Xtr = take_rows(X, tr), Xte = take_rows(X, te);
        const Eigen::VectorXd ytr = take(y, tr), yte = take(y, te);

        rng::Rng inner_rng(seed, "cv-inner", o);
        const std::vector<int> inner_fold = make_folds(tr.size(), kInner, inner_rng);
        const auto scores = score_grid(family, grid, grids, Xtr, ytr, inner_fold, kInner,
                                       rng::derive_seed(seed, "cv-fold", o));

        std::size_t best = 0;
        for (std::size_t gi = 1; gi < grid.size(); ++gi) {
            if (scores[gi] < scores[best] ||
                (scores[gi] == scores[best] && grid[gi].size_key < grid[best].size_key))
                best = gi;
        }
        chosen_idx[o] = best;

        const auto pred = predict_with(grid[best].spec, Xtr, ytr, Xte,
                                       rng::derive_seed(seed, "cv-refit", o));
        const auto ev = evaluate(pred, yte);
        per_fold[o] = {ev.r2, ev.rmse};
    });

    CvMetrics out;
    out.per_fold = per_fold;
    for (const auto& f : per_fold) {
        out.r2 += f.r2 / kOuter;
        out.rmse += f.rmse / kOuter;
    }
    // Modal choice across folds; ties go to the earliest grid point.
    std::map<std::size_t, int> votes;
    for (std::size_t idx : chosen_idx) ++votes[idx];
    std::size_t winner = chosen_idx[0];
    int best_votes = 0;
    for (const auto& [idx, v] : votes)
        if (v > best_votes) {
            best_votes = v;
            winner = idx;
        }
    out.chosen_spec = grid[winner].spec;
    return out;
}

}  // namespace lms::predict
