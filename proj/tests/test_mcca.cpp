#include <doctest.h>

#include <cmath>

#include "lms/core/rng.hpp"
#include "lms/core/error.hpp"
#include "lms/mcca/mcca.hpp"

using namespace lms;

namespace {

Eigen::MatrixXd random_block(int n, int p, std::uint64_t seed) {
    rng::Rng r(seed);
    Eigen::MatrixXd X(n, p);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < p; ++j) X(i, j) = r.normal();
    return X;
}

// Exact whitening: column-centered Z with sample covariance the identity.
Eigen::MatrixXd whitened(const Eigen::MatrixXd& X) {
    Eigen::MatrixXd Z = X;
    for (Eigen::Index j = 0; j < Z.cols(); ++j) Z.col(j).array() -= Z.col(j).mean();
    const Eigen::MatrixXd cov = Z.transpose() * Z / (static_cast<double>(Z.rows()) - 1.0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    const Eigen::MatrixXd inv_sqrt = es.operatorInverseSqrt();
    return Z * inv_sqrt;
}

mcca::FeatureGroup group_of(const std::string& name, const Eigen::MatrixXd& X) {
    std::vector<std::string> cols;
    for (int j = 0; j < X.cols(); ++j) cols.push_back(name + std::to_string(j));
    return mcca::FeatureGroup::standardized(name, cols, X);
}

}  // namespace

TEST_SUITE("mcca") {

TEST_CASE("two identical single-column groups align perfectly") {
    const auto base = random_block(50, 1, 1);
    const auto res = mcca::sparse_mcca({group_of("a", base), group_of("b", base)}, {1.0, 1.0});
    CHECK(std::fabs(res.weights[0](0)) == doctest::Approx(1.0));
    CHECK(std::fabs(res.weights[1](0)) == doctest::Approx(1.0));
    CHECK(res.pairwise_correlation(0, 1) == doctest::Approx(1.0));
}

TEST_CASE("max penalties reproduce classical cca on whitened blocks") {
    // With exactly whitened blocks the classical first canonical correlation
    // is the leading singular value of the cross-covariance; the
    // penalized-matrix-decomposition ascent must match it through the
    // composites' correlation.
    for (std::uint64_t seed : {2u, 3u, 4u}) {
        const int n = 200;
        Eigen::MatrixXd raw_x = random_block(n, 3, seed);
        Eigen::MatrixXd raw_y = random_block(n, 3, seed + 100);
        // Shared latent factor so the leading pair is well separated.
        const auto latent = random_block(n, 1, seed + 200);
        raw_x.col(0) += 2.0 * latent.col(0);
        raw_y.col(1) += 2.0 * latent.col(0);
        const Eigen::MatrixXd Zx = whitened(raw_x);
        const Eigen::MatrixXd Zy = whitened(raw_y);

        // Brute-force oracle: generalized eigenproblem reduces to the SVD of
        // the cross-covariance when the within-block covariances are I.
        const Eigen::MatrixXd cross = Zx.transpose() * Zy / (n - 1.0);
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(cross);
        const double rho_oracle = svd.singularValues()(0);

        const double pmax = std::sqrt(3.0);
        const auto res =
            mcca::sparse_mcca({group_of("x", Zx), group_of("y", Zy)}, {pmax, pmax}, 200);
        CHECK(res.pairwise_correlation(0, 1) == doctest::Approx(rho_oracle).epsilon(1e-6));
    }
}

TEST_CASE("objective trace is non-decreasing") {
    const auto a = random_block(120, 5, 7);
    auto b = random_block(120, 4, 8);
    b.col(1) += 0.8 * a.col(2);
    const auto res = mcca::sparse_mcca({group_of("a", a), group_of("b", b)}, {1.5, 1.4});
    for (std::size_t i = 1; i < res.objective_trace.size(); ++i)
        CHECK(res.objective_trace[i] >= res.objective_trace[i - 1] - 1e-9);
}

TEST_CASE("sign convention puts the largest weight positive") {
    auto a = random_block(100, 4, 9);
    auto b = random_block(100, 4, 10);
    b.col(0) -= 1.5 * a.col(1);  // strong negative link
    const auto res = mcca::sparse_mcca({group_of("a", a), group_of("b", b)}, {1.6, 1.6});
    for (const auto& w : res.weights) {
        Eigen::Index arg = 0;
        w.cwiseAbs().maxCoeff(&arg);
        CHECK(w(arg) >= 0.0);
    }
}

TEST_CASE("dominant correlated column receives the dominant weight") {
    // The "median volume" style column carries the shared factor; the weaker
    // "max volume" style column only echoes it.
    const int n = 300;
    const auto latent = random_block(n, 1, 11);
    Eigen::MatrixXd vol(n, 3), reg(n, 2);
    rng::Rng r(12);
    for (int i = 0; i < n; ++i) {
        const double f = latent(i, 0);
        vol(i, 0) = 1.2 * f + 0.4 * r.normal();  // median-like, strong
        vol(i, 1) = 0.4 * f + 1.0 * r.normal();  // max-like, weak
        vol(i, 2) = r.normal();
        reg(i, 0) = -1.0 * f + 0.5 * r.normal();
        reg(i, 1) = r.normal();
    }
    const auto res = mcca::sparse_mcca({group_of("vol", vol), group_of("reg", reg)},
                                       {std::sqrt(3.0), std::sqrt(2.0)});
    CHECK(std::fabs(res.weights[0](0)) > std::fabs(res.weights[0](1)));
    CHECK(std::fabs(res.weights[0](0)) > std::fabs(res.weights[0](2)));
}

TEST_CASE("penalties are validated and support shrinks along the path") {
    const auto a = random_block(150, 6, 13);
    auto b = random_block(150, 6, 14);
    b.col(0) += a.col(0);
    const std::vector<mcca::FeatureGroup> groups{group_of("a", a), group_of("b", b)};
    CHECK_THROWS_AS(mcca::sparse_mcca(groups, {0.5, 2.0}), ConfigError);
    CHECK_THROWS_AS(mcca::sparse_mcca(groups, {5.0, 2.0}), ConfigError);

    int prev_support = 1 << 20;
    for (double frac : {1.0, 0.7, 0.45, 0.2, 0.0}) {
        const double pen = 1.0 + frac * (std::sqrt(6.0) - 1.0);
        const auto res = mcca::sparse_mcca(groups, {pen, pen});
        const int support = res.support[0] + res.support[1];
        CHECK(support <= prev_support);
        prev_support = support;
    }
}

TEST_CASE("grid search prefers compact models and audits cleanly") {
    const auto a = random_block(200, 6, 15);
    auto b = random_block(200, 6, 16);
    b.col(2) += 1.5 * a.col(3);
    const std::vector<mcca::FeatureGroup> groups{group_of("a", a), group_of("b", b)};

    std::vector<std::vector<double>> grid;
    for (double frac : {0.0, 0.3, 0.6, 1.0}) {
        const double pen = 1.0 + frac * (std::sqrt(6.0) - 1.0);
        grid.push_back({pen, pen});
    }
    const auto choice = mcca::mcca_grid_search(groups, grid);
    CHECK(choice.total_support <= 6);  // half of 12 columns
    CHECK(choice.met_sparsity_screen);

    // Exhaustive audit: the winner's correlation beats every compliant
    // candidate with equal-or-larger support.
    for (const auto& pens : grid) {
        const auto res = mcca::sparse_mcca(groups, pens);
        int support = res.support[0] + res.support[1];
        if (support <= 6 && support >= choice.total_support)
            CHECK(choice.total_correlation >= res.total_correlation - 1e-9);
    }

    // Single-point grid returns that point.
    const auto single = mcca::mcca_grid_search(groups, {grid[1]});
    CHECK(single.penalties == grid[1]);
}

TEST_CASE("grid tie prefers the tighter penalty") {
    // One perfectly shared column: both penalties reach correlation 1, the
    // tighter support wins.
    const auto shared = random_block(80, 1, 17);
    Eigen::MatrixXd a(80, 2), b(80, 2);
    a.col(0) = shared.col(0);
    a.col(1) = random_block(80, 1, 18).col(0);
    b.col(0) = shared.col(0);
    b.col(1) = random_block(80, 1, 19).col(0);
    const std::vector<mcca::FeatureGroup> groups{group_of("a", a), group_of("b", b)};
    const auto choice =
        mcca::mcca_grid_search(groups, {{std::sqrt(2.0), std::sqrt(2.0)}, {1.0, 1.0}});
    CHECK(choice.penalties == std::vector<double>{1.0, 1.0});
}

TEST_CASE("composite scores: idempotence, zero weights, duplicated rows") {
    auto a = random_block(60, 3, 20);
    auto b = random_block(60, 3, 21);
    b.col(0) += a.col(1);
    const std::vector<mcca::FeatureGroup> groups{group_of("a", a), group_of("b", b)};
    const auto res = mcca::sparse_mcca(groups, {std::sqrt(3.0), std::sqrt(3.0)});

    const auto scores = mcca::composite_scores(res, {a, b});
    for (int i = 0; i < 60; ++i)
        for (int g = 0; g < 2; ++g)
            CHECK(scores(i, g) == doctest::Approx(res.composites(i, g)).epsilon(1e-9));

    // Duplicated student row projects to the original's composite.
    Eigen::MatrixXd a2 = a, b2 = b;
    a2.row(59) = a.row(0);
    b2.row(59) = b.row(0);
    const auto dup = mcca::composite_scores(res, {a2, b2});
    for (int g = 0; g < 2; ++g) CHECK(dup(59, g) == doctest::Approx(dup(0, g)));

    // All-zero weights produce an all-zero composite.
    auto zero = res;
    zero.weights[0].setZero();
    const auto z = mcca::composite_scores(zero, {a, b});
    for (int i = 0; i < 60; ++i) CHECK(z(i, 0) == 0.0);

    CHECK_THROWS_AS(mcca::composite_scores(res, {a}), DataError);
    CHECK_THROWS_AS(mcca::composite_scores(res, {a, b.leftCols(2)}), DataError);
}

TEST_CASE("input validation") {
    const auto a = random_block(40, 2, 22);
    CHECK_THROWS_AS(mcca::sparse_mcca({group_of("a", a)}, {1.0}), ConfigError);
    const auto b = random_block(39, 2, 23);
    CHECK_THROWS_AS(
        mcca::sparse_mcca({group_of("a", a), group_of("b", b)}, {1.0, 1.0}), DataError);
    CHECK_THROWS_AS(mcca::mcca_grid_search({group_of("a", a)}, {}), ConfigError);
}

}  // TEST_SUITE
