#include <cmath>

#include "lms/causal/causal.hpp"
#include "lms/core/prob.hpp"

namespace lms::causal {

SemFit fit_sem(const CausalGraph& dag, const Dataset& data) {
    if (dag.has_directed_cycle()) throw DataError("fit_sem: graph has a directed cycle");
    const std::size_t p = dag.size();
    const Eigen::Index n = data.data.rows();
    if (n < 3) throw DataError("fit_sem: need at least 3 rows");

    // Centered data columns in graph-node order.
    Eigen::MatrixXd Z(n, static_cast<Eigen::Index>(p));
    for (std::size_t v = 0; v < p; ++v) {
        const auto c = static_cast<Eigen::Index>(data.col(dag.name(v)));
        Z.col(static_cast<Eigen::Index>(v)) = data.data.col(c).array() - data.data.col(c).mean();
    }
    const double dn = static_cast<double>(n);

    SemFit fit;
    fit.n = static_cast<std::size_t>(n);

    // Per-node least squares on parents; residuals feed Psi.
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(p),
                                              static_cast<Eigen::Index>(p));
    Eigen::MatrixXd resid = Z;
    std::size_t n_edges = 0;
    for (std::size_t v = 0; v < p; ++v) {
        const auto parents = dag.parents(v);
        if (parents.empty()) continue;
        Eigen::MatrixXd P(n, static_cast<Eigen::Index>(parents.size()));
        for (std::size_t j = 0; j < parents.size(); ++j)
            P.col(static_cast<Eigen::Index>(j)) = Z.col(static_cast<Eigen::Index>(parents[j]));
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(P);
        qr.setThreshold(1e-10);
        if (qr.rank() < P.cols())
            throw DataError("fit_sem: collinear parents for node '" + dag.name(v) + "'");
        const Eigen::VectorXd beta = qr.solve(Z.col(static_cast<Eigen::Index>(v)));
        for (std::size_t j = 0; j < parents.size(); ++j) {
            B(static_cast<Eigen::Index>(v), static_cast<Eigen::Index>(parents[j])) =
                beta(static_cast<Eigen::Index>(j));
            fit.edges.push_back(
                {dag.name(parents[j]), dag.name(v), beta(static_cast<Eigen::Index>(j))});
            ++n_edges;
        }
        resid.col(static_cast<Eigen::Index>(v)) = Z.col(static_cast<Eigen::Index>(v)) - P * beta;
    }

    Eigen::MatrixXd psi = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(p),
                                                static_cast<Eigen::Index>(p));
    for (std::size_t v = 0; v < p; ++v) {
        const double var =
            resid.col(static_cast<Eigen::Index>(v)).squaredNorm() / dn;  // ML scaling
        psi(static_cast<Eigen::Index>(v), static_cast<Eigen::Index>(v)) = var;
        fit.residual_variance[dag.name(v)] = var;
    }
    std::size_t n_bidirected = 0;
    for (const auto& e : dag.edges()) {
        if (!(e.at_a == Mark::Arrow && e.at_b == Mark::Arrow)) continue;
        const double cov = resid.col(static_cast<Eigen::Index>(e.a))
                               .dot(resid.col(static_cast<Eigen::Index>(e.b))) /
                           dn;
        psi(static_cast<Eigen::Index>(e.a), static_cast<Eigen::Index>(e.b)) = cov;
        psi(static_cast<Eigen::Index>(e.b), static_cast<Eigen::Index>(e.a)) = cov;
        fit.covariances.push_back({dag.name(e.a), dag.name(e.b), cov});
        ++n_bidirected;
    }

    // Maximum-likelihood discrepancy between the implied and sample
    // covariance: F = ln|Sigma| - ln|S| + tr(S Sigma^-1) - p.
    const Eigen::MatrixXd eye =
        Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
    const Eigen::MatrixXd inv_ib = (eye - B).inverse();
    const Eigen::MatrixXd implied = inv_ib * psi * inv_ib.transpose();
    const Eigen::MatrixXd sample = Z.transpose() * Z / dn;

    Eigen::LLT<Eigen::MatrixXd> llt_implied(implied);
    Eigen::LLT<Eigen::MatrixXd> llt_sample(sample);
    if (llt_implied.info() != Eigen::Success || llt_sample.info() != Eigen::Success)
        throw DataError("fit_sem: covariance matrix not positive definite");
    auto logdet = [](const Eigen::LLT<Eigen::MatrixXd>& llt) {
        return 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    };
    const double trace = (llt_implied.solve(sample)).trace();
    const double discrepancy =
        logdet(llt_implied) - logdet(llt_sample) + trace - static_cast<double>(p);

    fit.chi_square = std::max(0.0, dn * discrepancy);
    const double free_params =
        static_cast<double>(n_edges + n_bidirected + p);  // coefficients + Psi entries
    fit.df = static_cast<double>(p * (p + 1)) / 2.0 - free_params;
    fit.p_value = fit.df > 0.0 ? prob::chi2_sf(fit.chi_square, fit.df) : 1.0;
    return fit;
}

}  // namespace lms::causal
