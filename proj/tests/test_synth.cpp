#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "lms/core/stats.hpp"
#include "lms/core/time.hpp"
#include "lms/features/features.hpp"
#include "lms/synth/synth.hpp"
#include "support/oracles.hpp"

using namespace lms;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

fs::path temp_dir(const std::string& tag) {
    auto p = fs::temp_directory_path() / ("lms_synth_" + tag);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

}  // namespace

TEST_SUITE("synth") {

TEST_CASE("spec validation catches bad inputs") {
    auto spec = synth::default_spec();
    CHECK_NOTHROW(synth::validate_spec(spec));

    auto bad = spec;
    bad.gender_marginal = {0.5, 0.6};
    CHECK_THROWS_AS(synth::validate_spec(bad), ConfigError);

    bad = spec;
    bad.noise_sds["end_gpa"] = 0.0;
    CHECK_THROWS_AS(synth::validate_spec(bad), ConfigError);

    bad = spec;
    bad.chronotype_archetypes[0].percent[3] += 5.0;  // breaks the sum-100 invariant
    CHECK_THROWS_AS(synth::validate_spec(bad), ConfigError);

    bad = spec;
    bad.edge_coefficients.push_back({"end_gpa", "regularity", 0.2});  // cycle
    CHECK_THROWS_AS(synth::validate_spec(bad), ConfigError);
}

TEST_CASE("scm model samples in topological order with planted coefficients") {
    synth::ScmModel model;
    model.nodes = {"a", "b", "c"};
    model.edges = {{"a", "b", 0.7}, {"b", "c", -0.5}, {"a", "c", 0.3}};
    model.noise_sd = {{"a", 1.0}, {"b", 0.8}, {"c", 0.6}};
    const auto data = model.sample(20000, 5);

    // Per-node least squares on the planted parents recovers the
    // coefficients within 3 standard errors.
    Eigen::MatrixXd Xc(20000, 2);
    Xc.col(0) = data.col(0).array() - data.col(0).mean();
    Xc.col(1) = data.col(1).array() - data.col(1).mean();
    Eigen::VectorXd yc = data.col(2).array() - data.col(2).mean();
    Eigen::Vector2d beta = (Xc.transpose() * Xc).ldlt().solve(Xc.transpose() * yc);
    const double se = 0.6 / std::sqrt(20000.0);  // upper bound on either SE
    CHECK(std::fabs(beta(0) - 0.3) < 3 * se);
    CHECK(std::fabs(beta(1) + 0.5) < 3 * se);

    synth::ScmModel cyclic;
    cyclic.nodes = {"a", "b"};
    cyclic.edges = {{"a", "b", 1.0}, {"b", "a", 1.0}};
    CHECK_THROWS_AS(cyclic.topological_order(), ConfigError);
}

TEST_CASE("zero students yields an empty cohort with valid ground truth") {
    auto spec = synth::default_spec();
    spec.n_students = 0;
    const auto [cohort, truth] = synth::generate_cohort(spec, 1);
    CHECK(cohort.students.empty());
    CHECK(cohort.events.empty());
    CHECK(truth.cluster_labels.empty());
    CHECK(!truth.true_dag.has_directed_cycle());
}

TEST_CASE("generation is deterministic per seed, byte-identical CSVs") {
    auto spec = synth::default_spec();
    spec.n_students = 120;
    const auto [c1, t1] = synth::generate_cohort(spec, 42);
    const auto [c2, t2] = synth::generate_cohort(spec, 42);
    const auto [c3, t3] = synth::generate_cohort(spec, 43);

    auto d1 = temp_dir("a"), d2 = temp_dir("b"), d3 = temp_dir("c");
    core::save_cohort(c1, d1.string());
    core::save_cohort(c2, d2.string());
    core::save_cohort(c3, d3.string());
    for (const char* name :
         {"demographics.csv", "enrollments.csv", "login_events.csv", "grades.csv"}) {
        CHECK(slurp(d1 / name) == slurp(d2 / name));
    }
    CHECK(slurp(d1 / "login_events.csv") != slurp(d3 / "login_events.csv"));
}

TEST_CASE("requested cohort size is honored and data is loadable") {
    auto spec = synth::default_spec();
    spec.n_students = 260;
    const auto [cohort, truth] = synth::generate_cohort(spec, 9);
    CHECK(cohort.students.size() == 260);
    const auto report = core::validate_cohort(cohort, 3);
    CHECK(report.ok());

    auto dir = temp_dir("load");
    core::save_cohort(cohort, dir.string());
    const auto loaded = core::load_cohort(dir.string(), spec.window, spec.cutoff);
    CHECK(loaded.students.size() == 260);
    CHECK(loaded.events.size() == cohort.events.size());
}

TEST_CASE("ground truth graph marks latent confounders as bidirected") {
    auto spec = synth::default_spec();
    const auto g0 = synth::ground_truth_graph(spec);
    CHECK(g0.is_directed(g0.require_index("login_volume"), g0.require_index("end_gpa")));
    CHECK(g0.is_directed(g0.require_index("start_gpa"), g0.require_index("end_gpa")));

    spec.latent_confounders.push_back({"L", "login_volume", "end_gpa", 0.5, 0.5});
    const auto g1 = synth::ground_truth_graph(spec);
    CHECK(!g1.index_of("L").has_value());  // hidden
    CHECK(g1.is_bidirected(g1.require_index("login_volume"), g1.require_index("end_gpa")));

    synth::ScmSpec single = synth::default_spec();
    single.edge_coefficients = {{"a_var", "b_var", 1.0}};
    const auto g2 = synth::ground_truth_graph(single);
    CHECK(g2.is_directed(g2.require_index("a_var"), g2.require_index("b_var")));
}

TEST_CASE("sample_login_timestamps follows the hourly profile") {
    std::array<double, 24> spike{};
    spike[14] = 100.0;
    rng::Rng r(5);
    const std::int64_t start = *timeutil::parse_date("2019-09-01");
    const std::int64_t end = *timeutil::parse_date("2019-09-20");
    const auto stamps = synth::sample_login_timestamps(spike, 50, start, end, r);
    CHECK(stamps.size() == 50);
    for (auto t : stamps) CHECK(timeutil::hour_of_day(t) == 14);

    rng::Rng r2(6);
    CHECK(synth::sample_login_timestamps(spike, 0, start, end, r2).empty());
    CHECK_THROWS_AS(synth::sample_login_timestamps(spike, 5, end, start, r2), ConfigError);

    std::array<double, 24> uniform{};
    uniform.fill(100.0 / 24.0);
    rng::Rng r3(7);
    const auto many = synth::sample_login_timestamps(uniform, 24000, start, end, r3);
    std::array<double, 24> share{};
    for (auto t : many) share[timeutil::hour_of_day(t)] += 1.0;
    for (int h = 0; h < 24; ++h)
        CHECK(std::fabs(share[h] / 24000.0 - 1.0 / 24.0) < 0.01);  // multinomial concentration
}

TEST_CASE("recomputed median login z-score tracks the planted volume latent") {
    auto spec = synth::default_spec();
    spec.n_students = 2000;
    const auto [cohort, truth] = synth::generate_cohort(spec, 11);
    const auto volume = feat::normalized_login_volume(cohort, 3);
    const auto& planted = truth.planted.at("login_volume");

    std::vector<double> med, latent;
    for (std::size_t i = 0; i < cohort.students.size(); ++i) {
        if (!volume[i]) continue;
        med.push_back(volume[i]->median);
        latent.push_back(planted[i]);
    }
    REQUIRE(med.size() > 1900);
    CHECK(stats::pearson(med, latent) >= 0.8);
}

TEST_CASE("planted sem coefficients recoverable from grades before realization noise") {
    // Clamp-safe, linear-only spec so ordinary least squares is unbiased.
    auto spec = synth::default_spec();
    spec.n_students = 1651;
    spec.nonlinearity = 0.0;
    spec.start_gpa_missing_rate = 0.0;
    spec.intercepts["end_gpa"] = 1.2;
    spec.intercepts["start_gpa"] = 2.6;
    const auto [cohort, truth] = synth::generate_cohort(spec, 21);

    const auto& vol = truth.planted.at("login_volume");
    const auto& reg = truth.planted.at("regularity");
    const auto& sgpa = truth.planted.at("start_gpa");
    const auto n = static_cast<Eigen::Index>(cohort.students.size());
    Eigen::MatrixXd X(n, 3);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        X(i, 0) = sgpa[i];
        X(i, 1) = vol[i];
        X(i, 2) = reg[i];
        y(i) = cohort.students[i].end_term_gpa;
    }
    Eigen::MatrixXd Xc = X;
    for (int j = 0; j < 3; ++j) Xc.col(j).array() -= X.col(j).mean();
    Eigen::VectorXd yc = y.array() - y.mean();
    Eigen::Vector3d beta = (Xc.transpose() * Xc).ldlt().solve(Xc.transpose() * yc);
    const Eigen::VectorXd resid = yc - Xc * beta;
    const double sigma = std::sqrt(resid.squaredNorm() / (static_cast<double>(n) - 4.0));
    const Eigen::Matrix3d inv = (Xc.transpose() * Xc).inverse();
    CHECK(std::fabs(beta(0) - 0.50) < 3 * sigma * std::sqrt(inv(0, 0)));
    CHECK(std::fabs(beta(1) - 0.19) < 3 * sigma * std::sqrt(inv(1, 1)));
    CHECK(std::fabs(beta(2) + 0.15) < 3 * sigma * std::sqrt(inv(2, 2)));
}

}  // TEST_SUITE
