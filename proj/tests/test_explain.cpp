#include <doctest.h>

#include <cmath>

#include "lms/core/rng.hpp"
#include "lms/explain/explain.hpp"
#include "lms/predict/predict.hpp"

using namespace lms;

namespace {

explain::PerturbationModel gaussian_training(int p, std::uint64_t seed, int n = 400) {
    rng::Rng r(seed);
    Eigen::MatrixXd X(n, p);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < p; ++j) X(i, j) = r.normal();
    return explain::PerturbationModel::from_training(X, std::vector<bool>(p, false));
}

}  // namespace

TEST_SUITE("explain") {

TEST_CASE("lime signs follow a linear oracle's coefficients") {
    // f(a, b) = 3a - 2b: under independent perturbations the correlation of
    // a perturbed feature with the prediction has the coefficient's sign.
    explain::PredictFn model = [](const Eigen::MatrixXd& X) {
        return Eigen::VectorXd(3.0 * X.col(0) - 2.0 * X.col(1));
    };
    const auto perturb = gaussian_training(2, 1);
    Eigen::VectorXd x(2);
    x << 0.3, -1.2;
    const auto imp = explain::lime_local(model, x, perturb, {500, 0.3}, 11);
    CHECK(imp[0].value > 0.5);
    CHECK(imp[1].value < -0.5);
}

TEST_CASE("constant model yields importances within sampling noise") {
    explain::PredictFn model = [](const Eigen::MatrixXd& X) {
        return Eigen::VectorXd(Eigen::VectorXd::Constant(X.rows(), 2.5));
    };
    const auto perturb = gaussian_training(3, 2);
    Eigen::VectorXd x = Eigen::VectorXd::Zero(3);
    const auto imp = explain::lime_local(model, x, perturb, {2000, 0.3}, 12);
    for (const auto& f : imp) CHECK(std::fabs(f.value) < 0.05);
}

TEST_CASE("lime is deterministic per seed and validates n_samples") {
    explain::PredictFn model = [](const Eigen::MatrixXd& X) {
        return Eigen::VectorXd(X.col(0));
    };
    const auto perturb = gaussian_training(2, 3);
    Eigen::VectorXd x = Eigen::VectorXd::Zero(2);
    const auto a = explain::lime_local(model, x, perturb, {100, 0.3}, 5);
    const auto b = explain::lime_local(model, x, perturb, {100, 0.3}, 5);
    CHECK(a[0].value == b[0].value);
    const auto c = explain::lime_local(model, x, perturb, {100, 0.3}, 6);
    CHECK(a[0].value != c[0].value);
    CHECK_THROWS_AS(explain::lime_local(model, x, perturb, {10, 0.3}, 5), ConfigError);
}

TEST_CASE("zero-variance features are flagged with zero importance") {
    explain::PredictFn model = [](const Eigen::MatrixXd& X) {
        return Eigen::VectorXd(X.col(0));
    };
    rng::Rng r(4);
    Eigen::MatrixXd X(100, 2);
    for (int i = 0; i < 100; ++i) {
        X(i, 0) = r.normal();
        X(i, 1) = 7.0;  // constant column
    }
    const auto perturb = explain::PerturbationModel::from_training(X, {false, false});
    const auto imp = explain::lime_local(model, X.row(0).transpose(), perturb, {200, 0.3}, 7);
    CHECK(imp[1].value == 0.0);
    CHECK(imp[1].flagged);
}

TEST_CASE("indicator features resample from the training marginal") {
    explain::PredictFn model = [](const Eigen::MatrixXd& X) {
        return Eigen::VectorXd(X.col(0) + 4.0 * X.col(1));
    };
    rng::Rng r(5);
    Eigen::MatrixXd X(500, 2);
    for (int i = 0; i < 500; ++i) {
        X(i, 0) = r.normal();
        X(i, 1) = r.uniform() < 0.3 ? 1.0 : 0.0;
    }
    const auto perturb = explain::PerturbationModel::from_training(X, {false, true});
    Eigen::VectorXd x(2);
    x << 0.0, 1.0;
    const auto imp = explain::lime_local(model, x, perturb, {2000, 0.3}, 8);
    CHECK(imp[1].value > 0.5);  // indicator flips change predictions a lot
}

TEST_CASE("a feature the tree never splits on has near-zero importance") {
    rng::Rng r(6);
    Eigen::MatrixXd X(400, 2);
    Eigen::VectorXd y(400);
    for (int i = 0; i < 400; ++i) {
        X(i, 0) = r.normal();
        X(i, 1) = r.normal();
        y(i) = X(i, 0) > 0.0 ? 2.0 : -2.0;  // depends on feature 0 only
    }
    const auto tree = predict::fit_tree(X, y, 2, 20);
    REQUIRE(!tree.uses_feature(1));
    explain::PredictFn model = [&tree](const Eigen::MatrixXd& P) { return tree.predict(P); };
    const auto perturb = explain::PerturbationModel::from_training(X, {false, false});
    const std::size_t n_samples = 2000;
    const auto imp =
        explain::lime_local(model, X.row(0).transpose(), perturb, {n_samples, 0.3}, 9);
    CHECK(std::fabs(imp[1].value) < 3.0 / std::sqrt(static_cast<double>(n_samples)));
}

TEST_CASE("lime_global of a singleton group equals the local importances") {
    explain::PredictFn model = [](const Eigen::MatrixXd& X) {
        return Eigen::VectorXd(2.0 * X.col(0) - X.col(1));
    };
    rng::Rng r(7);
    Eigen::MatrixXd X(10, 2);
    for (int i = 0; i < 10; ++i)
        for (int j = 0; j < 2; ++j) X(i, j) = r.normal();
    const auto perturb = explain::PerturbationModel::from_training(X, {false, false});
    std::vector<bool> only3(10, false);
    only3[3] = true;

    const std::uint64_t seed = 321;
    const auto global = explain::lime_global(model, X, only3, {"f0", "f1"}, perturb,
                                             {200, 0.3}, seed, "one");
    const auto local = explain::lime_local(model, X.row(3).transpose(), perturb, {200, 0.3},
                                           rng::derive_seed(seed, "lime-sample", 3));
    CHECK(global.per_feature[0].value == doctest::Approx(local[0].value));
    CHECK(global.per_feature[1].value == doctest::Approx(local[1].value));
}

TEST_CASE("group reports average to the all-sample report by size weighting") {
    explain::PredictFn model = [](const Eigen::MatrixXd& X) {
        return Eigen::VectorXd(X.col(0) + 0.5 * X.col(1));
    };
    rng::Rng r(8);
    Eigen::MatrixXd X(30, 2);
    for (int i = 0; i < 30; ++i)
        for (int j = 0; j < 2; ++j) X(i, j) = r.normal();
    const auto perturb = explain::PerturbationModel::from_training(X, {false, false});

    std::vector<bool> all(30, true), ga(30, false), gb(30, false);
    for (int i = 0; i < 30; ++i) (i < 12 ? ga : gb)[i] = true;
    const std::uint64_t seed = 55;
    const auto ra = explain::lime_global(model, X, ga, {"f0", "f1"}, perturb, {100, 0.3}, seed, "a");
    const auto rb = explain::lime_global(model, X, gb, {"f0", "f1"}, perturb, {100, 0.3}, seed, "b");
    const auto rall =
        explain::lime_global(model, X, all, {"f0", "f1"}, perturb, {100, 0.3}, seed, "all");
    for (int j = 0; j < 2; ++j) {
        const double weighted =
            (12.0 * ra.per_feature[j].value + 18.0 * rb.per_feature[j].value) / 30.0;
        CHECK(rall.per_feature[j].value == doctest::Approx(weighted).epsilon(1e-9));
    }
}

TEST_CASE("global sign recovery holds for strong coefficients across seeds") {
    const std::vector<double> beta{1.5, -0.9, 0.6, -0.5, 0.1, 0.0};
    explain::PredictFn model = [&beta](const Eigen::MatrixXd& X) {
        Eigen::VectorXd out = Eigen::VectorXd::Zero(X.rows());
        for (std::size_t j = 0; j < beta.size(); ++j)
            out += beta[j] * X.col(static_cast<Eigen::Index>(j));
        return out;
    };
    int good = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        rng::Rng r(3000 + seed);
        Eigen::MatrixXd X(40, 6);
        for (int i = 0; i < 40; ++i)
            for (int j = 0; j < 6; ++j) X(i, j) = r.normal();
        const auto perturb = explain::PerturbationModel::from_training(
            X, std::vector<bool>(6, false));
        const auto rep = explain::lime_global(model, X, std::vector<bool>(40, true),
                                              {"a", "b", "c", "d", "e", "f"}, perturb,
                                              {200, 0.3}, seed, "all");
        bool ok = true;
        for (std::size_t j = 0; j < beta.size(); ++j) {
            if (std::fabs(beta[j]) < 0.5) continue;
            ok = ok && (rep.per_feature[j].value * beta[j] > 0.0);
        }
        good += ok;
    }
    CHECK(good >= 18);  // >= 90% of seeds
}

TEST_CASE("correlation importance basics and invariances") {
    rng::Rng r(9);
    const int n = 5000;
    Eigen::MatrixXd X(n, 3);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
        X(i, 0) = r.normal();
        X(i, 1) = r.normal();          // independent of y
        X(i, 2) = 5.0 * X(i, 0) + 2.0; // affine rescale of feature 0
        y(i) = X(i, 0);
    }
    const auto rep = explain::correlation_importance(X, y, std::vector<bool>(n, true),
                                                     {"x", "noise", "scaled"}, "all");
    CHECK(rep.per_feature[0].value == doctest::Approx(1.0));
    CHECK(std::fabs(rep.per_feature[1].value) < 0.05);
    CHECK(rep.per_feature[2].value == doctest::Approx(rep.per_feature[0].value).epsilon(1e-9));

    std::vector<bool> tiny(n, false);
    tiny[0] = tiny[1] = true;
    CHECK_THROWS_AS(
        explain::correlation_importance(X, y, tiny, {"x", "noise", "scaled"}, "tiny"),
        DataError);
}

TEST_CASE("group regression recovers the planted focal coefficients with stars") {
    // Planted coefficients 0.171 and -0.398 with noise sd 0.3 at n = 400;
    // the closed-form least squares oracle puts both well inside +/- 0.08.
    rng::Rng r(10);
    const int n = 400;
    Eigen::MatrixXd X(n, 3);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < 3; ++j) X(i, j) = r.normal();
        y(i) = 0.171 * X(i, 0) - 0.398 * X(i, 1) + 0.3 * r.normal();
    }
    const auto reg = explain::group_regression(X, {"medlogin", "regularity", "control"}, y,
                                               std::vector<bool>(n, true), "low gpa");
    REQUIRE(reg.coefficients.size() == 3);
    CHECK(std::fabs(reg.coefficients[0].coefficient - 0.171) < 0.08);
    CHECK(std::fabs(reg.coefficients[1].coefficient + 0.398) < 0.08);
    CHECK(reg.coefficients[0].significant);
    CHECK(reg.coefficients[1].significant);
    CHECK(!reg.coefficients[2].significant);
}

TEST_CASE("pure-noise regressions star at roughly the nominal rate") {
    int stars = 0;
    for (int seed = 0; seed < 200; ++seed) {
        rng::Rng r(5000 + seed);
        const int n = 120;
        Eigen::MatrixXd X(n, 1);
        Eigen::VectorXd y(n);
        for (int i = 0; i < n; ++i) {
            X(i, 0) = r.normal();
            y(i) = r.normal();
        }
        const auto reg =
            explain::group_regression(X, {"noise"}, y, std::vector<bool>(n, true), "null");
        stars += reg.coefficients[0].significant;
    }
    // Binomial(200, 0.05): central 99.9% range.
    CHECK(stars >= 2);
    CHECK(stars <= 22);
}

TEST_CASE("duplicated columns are dropped with a warning") {
    rng::Rng r(11);
    const int n = 50;
    Eigen::MatrixXd X(n, 3);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
        X(i, 0) = r.normal();
        X(i, 1) = X(i, 0);  // exact duplicate
        X(i, 2) = r.normal();
        y(i) = X(i, 0) + 0.5 * X(i, 2) + 0.1 * r.normal();
    }
    const auto reg = explain::group_regression(X, {"a", "a_copy", "b"}, y,
                                               std::vector<bool>(n, true), "dup");
    CHECK(reg.dropped.size() == 1);
    CHECK(reg.coefficients.size() == 2);
}

TEST_CASE("full-group regression equals plain least squares") {
    rng::Rng r(12);
    const int n = 80;
    Eigen::MatrixXd X(n, 2);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
        X(i, 0) = r.normal();
        X(i, 1) = r.normal();
        y(i) = 0.7 * X(i, 0) - 0.2 * X(i, 1) + 0.2 * r.normal();
    }
    const auto reg =
        explain::group_regression(X, {"a", "b"}, y, std::vector<bool>(n, true), "all");
    Eigen::MatrixXd D(n, 3);
    D.col(0).setOnes();
    D.col(1) = X.col(0);
    D.col(2) = X.col(1);
    Eigen::VectorXd beta = D.colPivHouseholderQr().solve(y);
    CHECK(reg.intercept == doctest::Approx(beta(0)).epsilon(1e-9));
    CHECK(reg.coefficients[0].coefficient == doctest::Approx(beta(1)).epsilon(1e-9));
    CHECK(reg.coefficients[1].coefficient == doctest::Approx(beta(2)).epsilon(1e-9));
}

}  // TEST_SUITE
