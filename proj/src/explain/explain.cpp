#include "lms/explain/explain.hpp"

#include <cmath>

#include "lms/core/error.hpp"
#include "lms/core/prob.hpp"
#include "lms/core/rng.hpp"
#include "lms/core/stats.hpp"

namespace lms::explain {
namespace {

double column_pearson(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return stats::pearson({a.data(), static_cast<std::size_t>(a.size())},
                          {b.data(), static_cast<std::size_t>(b.size())});
}

std::vector<int> mask_rows(const std::vector<bool>& mask) {
    std::vector<int> rows;
    for (std::size_t i = 0; i < mask.size(); ++i)
        if (mask[i]) rows.push_back(static_cast<int>(i));
    return rows;
}

}  // namespace

PerturbationModel PerturbationModel::from_training(const Eigen::MatrixXd& X,
                                                   const std::vector<bool>& indicator) {
    if (static_cast<std::size_t>(X.cols()) != indicator.size())
        throw DataError("perturbation model: indicator flags don't match columns");
    PerturbationModel m;
    m.indicator = indicator;
    m.sd.resize(X.cols());
    m.indicator_p.resize(X.cols());
    const double n = static_cast<double>(X.rows());
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
        const double mean = X.col(j).mean();
        m.sd(j) = n > 1 ? std::sqrt((X.col(j).array() - mean).square().sum() / (n - 1.0)) : 0.0;
        m.indicator_p(j) = mean;
    }
    return m;
}

std::vector<FeatureImportance> lime_local(const PredictFn& model, const Eigen::VectorXd& x,
                                          const PerturbationModel& perturb,
                                          const LimeOptions& opts, std::uint64_t seed) {
    if (opts.n_samples < 30) throw ConfigError("lime_local: n_samples must be >= 30");
    const Eigen::Index p = x.size();
    const Eigen::Index m = static_cast<Eigen::Index>(opts.n_samples);

    Eigen::MatrixXd P(m, p);
    rng::Rng r(seed, "lime-perturb");
    for (Eigen::Index j = 0; j < p; ++j) {
        if (perturb.indicator[static_cast<std::size_t>(j)]) {
            const double prob = perturb.indicator_p(j);
            for (Eigen::Index i = 0; i < m; ++i) P(i, j) = r.uniform() < prob ? 1.0 : 0.0;
        } else {
            const double noise = opts.perturb_scale * perturb.sd(j);
            for (Eigen::Index i = 0; i < m; ++i) P(i, j) = x(j) + noise * r.normal();
        }
    }
    const Eigen::VectorXd preds = model(P);

    std::vector<FeatureImportance> out(static_cast<std::size_t>(p));
    const double pred_mean = preds.mean();
    const double pred_var = (preds.array() - pred_mean).square().sum();
    for (Eigen::Index j = 0; j < p; ++j) {
        auto& imp = out[static_cast<std::size_t>(j)];
        const double col_mean = P.col(j).mean();
        const double col_var = (P.col(j).array() - col_mean).square().sum();
        if (col_var <= 0.0 || pred_var <= 0.0) {
            imp.value = 0.0;
            imp.flagged = col_var <= 0.0;
        } else {
            imp.value = column_pearson(P.col(j), preds);
        }
        imp.magnitude = std::fabs(imp.value);
    }
    return out;
}

ImportanceReport lime_global(const PredictFn& model, const Eigen::MatrixXd& X,
                             const std::vector<bool>& group_mask,
                             const std::vector<std::string>& feature_names,
                             const PerturbationModel& perturb, const LimeOptions& opts,
                             std::uint64_t seed, const std::string& scope) {
    const auto rows = mask_rows(group_mask);
    if (rows.empty()) throw DataError("lime_global: empty group '" + scope + "'");

    ImportanceReport rep;
    rep.scope = scope;
    rep.method = "LIME";
    rep.features = feature_names;
    rep.per_feature.assign(feature_names.size(), {});
    for (int row : rows) {
        const auto local = lime_local(model, X.row(row).transpose(), perturb, opts,
                                      rng::derive_seed(seed, "lime-sample",
                                                       static_cast<std::uint64_t>(row)));
        for (std::size_t j = 0; j < local.size(); ++j) {
            rep.per_feature[j].value += local[j].value;
            rep.per_feature[j].magnitude += std::fabs(local[j].value);
            rep.per_feature[j].flagged = rep.per_feature[j].flagged || local[j].flagged;
        }
    }
    const double g = static_cast<double>(rows.size());
    for (auto& f : rep.per_feature) {
        f.value /= g;
        f.magnitude /= g;
    }
    return rep;
}

ImportanceReport correlation_importance(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                        const std::vector<bool>& group_mask,
                                        const std::vector<std::string>& feature_names,
                                        const std::string& scope) {
    const auto rows = mask_rows(group_mask);
    if (rows.size() < 3) throw DataError("correlation_importance: group '" + scope + "' too small");

    Eigen::VectorXd yg(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) yg(static_cast<Eigen::Index>(i)) = y(rows[i]);

    ImportanceReport rep;
    rep.scope = scope;
    rep.method = "Correlation";
    rep.features = feature_names;
    rep.per_feature.assign(feature_names.size(), {});
    Eigen::VectorXd xg(static_cast<Eigen::Index>(rows.size()));
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
        for (std::size_t i = 0; i < rows.size(); ++i)
            xg(static_cast<Eigen::Index>(i)) = X(rows[i], j);
        auto& f = rep.per_feature[static_cast<std::size_t>(j)];
        const double mean = xg.mean();
        if ((xg.array() - mean).square().sum() <= 0.0) {
            f.value = 0.0;
            f.flagged = true;
        } else {
            f.value = column_pearson(xg, yg);
        }
        f.magnitude = std::fabs(f.value);
    }
    return rep;
}

GroupRegression group_regression(const Eigen::MatrixXd& X_subset,
                                 const std::vector<std::string>& names, const Eigen::VectorXd& y,
                                 const std::vector<bool>& group_mask, const std::string& scope) {
    if (static_cast<std::size_t>(X_subset.cols()) != names.size())
        throw DataError("group_regression: name/column mismatch");
    const auto rows = mask_rows(group_mask);
    const std::size_t p = names.size();
    if (rows.size() <= p + 1)
        throw DataError("group_regression: group '" + scope + "' smaller than predictors + 1");

    Eigen::MatrixXd Xg(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(p));
    Eigen::VectorXd yg(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        Xg.row(static_cast<Eigen::Index>(i)) = X_subset.row(rows[i]);
        yg(static_cast<Eigen::Index>(i)) = y(rows[i]);
    }

    GroupRegression out;
    out.scope = scope;

    // Drop collinear columns via pivoted QR on the centered design.
    Eigen::MatrixXd centered = Xg;
    Eigen::VectorXd col_mean(Xg.cols());
    for (Eigen::Index j = 0; j < Xg.cols(); ++j) {
        col_mean(j) = Xg.col(j).mean();
        centered.col(j).array() -= col_mean(j);
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(centered);
    qr.setThreshold(1e-10);
    const Eigen::Index rank = qr.rank();
    std::vector<int> kept;
    if (rank < centered.cols()) {
        const auto& perm = qr.colsPermutation().indices();
        std::vector<bool> keep(p, false);
        for (Eigen::Index i = 0; i < rank; ++i) keep[static_cast<std::size_t>(perm(i))] = true;
        for (std::size_t j = 0; j < p; ++j) {
            if (keep[j]) kept.push_back(static_cast<int>(j));
            else out.dropped.push_back(names[j]);
        }
    } else {
        for (std::size_t j = 0; j < p; ++j) kept.push_back(static_cast<int>(j));
    }

    const Eigen::Index q = static_cast<Eigen::Index>(kept.size());
    Eigen::MatrixXd design(Xg.rows(), q + 1);
    design.col(0).setOnes();
    for (Eigen::Index j = 0; j < q; ++j) design.col(j + 1) = Xg.col(kept[j]);

    const Eigen::VectorXd beta = design.colPivHouseholderQr().solve(yg);
    const Eigen::VectorXd resid = yg - design * beta;
    const double dof = static_cast<double>(Xg.rows()) - static_cast<double>(q + 1);
    const double sigma2 = resid.squaredNorm() / dof;
    const Eigen::MatrixXd xtx_inv =
        (design.transpose() * design).ldlt().solve(Eigen::MatrixXd::Identity(q + 1, q + 1));

    out.intercept = beta(0);
    for (Eigen::Index j = 0; j < q; ++j) {
        RegressionCoefficient c;
        c.name = names[static_cast<std::size_t>(kept[j])];
        c.coefficient = beta(j + 1);
        c.std_error = std::sqrt(std::max(0.0, sigma2 * xtx_inv(j + 1, j + 1)));
        const double t = c.std_error > 0.0 ? c.coefficient / c.std_error : 0.0;
        c.p_value = prob::t_two_sided_p(t, dof);
        c.significant = c.p_value < 0.05;
        out.coefficients.push_back(std::move(c));
    }
    return out;
}

}  // namespace lms::explain
