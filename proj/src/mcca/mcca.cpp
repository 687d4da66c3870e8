#include "lms/mcca/mcca.hpp"

#include <algorithm>
#include <cmath>

#include "lms/core/error.hpp"
#include "lms/core/stats.hpp"

namespace lms::mcca {
namespace {

// argmax a'w subject to ||w||_2 <= 1, ||w||_1 <= c: soft-threshold a, then
// renormalize; the threshold is found by bisection when the plain solution
// breaks the L1 budget.
Eigen::VectorXd constrained_update(const Eigen::VectorXd& a, double c) {
    const double norm = a.norm();
    if (norm <= 1e-300) return Eigen::VectorXd::Zero(a.size());

    auto soft_unit = [&a](double delta) {
        Eigen::VectorXd w = a;
        for (Eigen::Index i = 0; i < w.size(); ++i) {
            const double m = std::fabs(w(i)) - delta;
            w(i) = m > 0.0 ? std::copysign(m, w(i)) : 0.0;
        }
        const double n2 = w.norm();
        if (n2 > 0.0) w /= n2;
        return w;
    };

    Eigen::VectorXd w = soft_unit(0.0);
    if (w.lpNorm<1>() <= c + 1e-12) return w;

    double lo = 0.0, hi = a.cwiseAbs().maxCoeff();
    for (int iter = 0; iter < 200; ++iter) {
        const double mid = 0.5 * (lo + hi);
        w = soft_unit(mid);
        const double l1 = w.lpNorm<1>();
        if (std::fabs(l1 - c) < 1e-10) break;
        if (l1 > c) lo = mid;
        else hi = mid;
    }
    return soft_unit(0.5 * (lo + hi));
}

Eigen::VectorXd leading_right_singular(const Eigen::MatrixXd& X) {
    const Eigen::MatrixXd gram = X.transpose() * X;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
    Eigen::VectorXd v = es.eigenvectors().col(gram.cols() - 1);  // largest eigenvalue last
    // Deterministic sign: largest-magnitude entry positive.
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0.0) v = -v;
    return v;
}

double objective(const std::vector<Eigen::MatrixXd>& cross,
                 const std::vector<Eigen::VectorXd>& w, std::size_t g_count) {
    double total = 0.0;
    for (std::size_t i = 0; i < g_count; ++i)
        for (std::size_t j = i + 1; j < g_count; ++j)
            total += w[i].dot(cross[i * g_count + j] * w[j]);
    return total;
}

}  // namespace

FeatureGroup FeatureGroup::standardized(std::string name, std::vector<std::string> columns,
                                        const Eigen::MatrixXd& raw) {
    if (raw.cols() == 0) throw DataError("feature group '" + name + "' has no columns");
    if (static_cast<std::size_t>(raw.cols()) != columns.size())
        throw DataError("feature group '" + name + "': column name count mismatch");
    FeatureGroup g;
    g.name = std::move(name);
    g.columns = std::move(columns);
    g.data = raw;
    g.col_mean.resize(raw.cols());
    g.col_sd.resize(raw.cols());
    const double n = static_cast<double>(raw.rows());
    for (Eigen::Index j = 0; j < raw.cols(); ++j) {
        g.col_mean(j) = raw.col(j).mean();
        g.data.col(j).array() -= g.col_mean(j);
        const double sd =
            n > 1 ? std::sqrt(g.data.col(j).squaredNorm() / (n - 1.0)) : 0.0;
        g.col_sd(j) = sd > 0.0 ? sd : 1.0;
        g.data.col(j) /= g.col_sd(j);
    }
    return g;
}

MccaResult sparse_mcca(const std::vector<FeatureGroup>& groups,
                       const std::vector<double>& penalties, int max_iters, std::uint64_t seed) {
    (void)seed;  // the ascent is deterministic; kept for interface stability
    const std::size_t G = groups.size();
    if (G < 2) throw ConfigError("sparse_mcca: need at least two groups");
    if (penalties.size() != G) throw ConfigError("sparse_mcca: one penalty per group required");
    const Eigen::Index n = groups[0].data.rows();
    for (const auto& g : groups) {
        if (g.data.rows() != n) throw DataError("sparse_mcca: groups disagree on row count");
        if (g.data.cols() == 0) throw DataError("sparse_mcca: empty group '" + g.name + "'");
    }
    for (std::size_t g = 0; g < G; ++g) {
        const double max_pen = std::sqrt(static_cast<double>(groups[g].data.cols()));
        if (penalties[g] < 1.0 || penalties[g] > max_pen + 1e-9)
            throw ConfigError("sparse_mcca: penalty for group '" + groups[g].name +
                              "' outside [1, sqrt(p)]");
    }

    // Cross-products, scaled by 1/(n-1) so entries are correlations.
    std::vector<Eigen::MatrixXd> cross(G * G);
    const double scale = n > 1 ? 1.0 / (static_cast<double>(n) - 1.0) : 1.0;
    for (std::size_t i = 0; i < G; ++i)
        for (std::size_t j = i + 1; j < G; ++j)
            cross[i * G + j] = scale * (groups[i].data.transpose() * groups[j].data);

    std::vector<Eigen::VectorXd> w(G);
    for (std::size_t g = 0; g < G; ++g) w[g] = leading_right_singular(groups[g].data);

    MccaResult res;
    res.objective_trace.push_back(objective(cross, w, G));
    for (int iter = 0; iter < max_iters; ++iter) {
        for (std::size_t g = 0; g < G; ++g) {
            Eigen::VectorXd a = Eigen::VectorXd::Zero(groups[g].data.cols());
            for (std::size_t h = 0; h < G; ++h) {
                if (h == g) continue;
                if (g < h) a += cross[g * G + h] * w[h];
                else a += cross[h * G + g].transpose() * w[h];
            }
            w[g] = constrained_update(a, penalties[g]);
        }
        const double obj = objective(cross, w, G);
        const double prev = res.objective_trace.back();
        res.objective_trace.push_back(obj);
        if (std::fabs(obj - prev) < 1e-6 * std::max(1.0, std::fabs(prev))) break;
    }

    // Sign convention: largest-magnitude weight positive per block.
    for (auto& wg : w) {
        if (wg.cwiseAbs().maxCoeff() <= 0.0) continue;
        Eigen::Index arg = 0;
        wg.cwiseAbs().maxCoeff(&arg);
        if (wg(arg) < 0.0) wg = -wg;
    }

    res.composites.resize(n, static_cast<Eigen::Index>(G));
    res.pairwise_correlation = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(G),
                                                         static_cast<Eigen::Index>(G));
    for (std::size_t g = 0; g < G; ++g) {
        res.group_names.push_back(groups[g].name);
        res.group_columns.push_back(groups[g].columns);
        res.col_mean.push_back(groups[g].col_mean);
        res.col_sd.push_back(groups[g].col_sd);
        res.weights.push_back(w[g]);
        res.penalties.push_back(penalties[g]);
        int nz = 0;
        for (Eigen::Index i = 0; i < w[g].size(); ++i)
            if (std::fabs(w[g](i)) > 1e-12) ++nz;
        res.support.push_back(nz);
        res.composites.col(static_cast<Eigen::Index>(g)) = groups[g].data * w[g];
    }
    for (std::size_t i = 0; i < G; ++i)
        for (std::size_t j = i + 1; j < G; ++j) {
            const auto a = res.composites.col(static_cast<Eigen::Index>(i));
            const auto b = res.composites.col(static_cast<Eigen::Index>(j));
            const double r = stats::pearson({a.data(), static_cast<std::size_t>(n)},
                                            {b.data(), static_cast<std::size_t>(n)});
            res.pairwise_correlation(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = r;
            res.pairwise_correlation(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = r;
            res.total_correlation += std::fabs(r);
        }
    return res;
}

GridChoice mcca_grid_search(const std::vector<FeatureGroup>& groups,
                            const std::vector<std::vector<double>>& penalty_grid, int max_iters,
                            std::uint64_t seed) {
    if (penalty_grid.empty()) throw ConfigError("mcca_grid_search: empty grid");
    int total_cols = 0;
    for (const auto& g : groups) total_cols += static_cast<int>(g.data.cols());
    const int budget = total_cols / 2;

    struct Candidate {
        GridChoice choice;
    };
    std::vector<GridChoice> all;
    for (const auto& pens : penalty_grid) {
        GridChoice c;
        c.penalties = pens;
        c.result = sparse_mcca(groups, pens, max_iters, seed);
        c.total_correlation = c.result.total_correlation;
        c.total_support = 0;
        for (int s : c.result.support) c.total_support += s;
        c.met_sparsity_screen = c.total_support <= budget;
        all.push_back(std::move(c));
    }

    const GridChoice* best = nullptr;
    for (const auto& c : all) {
        if (!c.met_sparsity_screen) continue;
        if (!best || c.total_correlation > best->total_correlation ||
            (c.total_correlation == best->total_correlation &&
             c.total_support < best->total_support))
            best = &c;
    }
    if (!best) {
        // Nothing met the compactness screen; fall back to raw correlation.
        for (const auto& c : all)
            if (!best || c.total_correlation > best->total_correlation) best = &c;
        GridChoice out = *best;
        out.fallback = true;
        return out;
    }
    return *best;
}

Eigen::MatrixXd composite_scores(const MccaResult& result,
                                 const std::vector<Eigen::MatrixXd>& raw_blocks) {
    const std::size_t G = result.weights.size();
    if (raw_blocks.size() != G) throw DataError("composite_scores: block count mismatch");
    const Eigen::Index n = raw_blocks.empty() ? 0 : raw_blocks[0].rows();
    Eigen::MatrixXd out(n, static_cast<Eigen::Index>(G));
    for (std::size_t g = 0; g < G; ++g) {
        const Eigen::MatrixXd& raw = raw_blocks[g];
        if (raw.cols() != result.weights[g].size())
            throw DataError("composite_scores: column mismatch in group '" +
                            result.group_names[g] + "'");
        if (raw.rows() != n) throw DataError("composite_scores: row mismatch across blocks");
        Eigen::MatrixXd z = raw;
        for (Eigen::Index j = 0; j < z.cols(); ++j)
            z.col(j) = (z.col(j).array() - result.col_mean[g](j)) / result.col_sd[g](j);
        out.col(static_cast<Eigen::Index>(g)) = z * result.weights[g];
    }
    return out;
}

}  // namespace lms::mcca
