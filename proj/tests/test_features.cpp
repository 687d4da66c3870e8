#include <doctest.h>

#include <cmath>

#include "lms/core/rng.hpp"
#include "lms/core/stats.hpp"
#include "lms/features/features.hpp"
#include "lms/synth/synth.hpp"
#include "support/builders.hpp"

using namespace lms;
using testsupport::CohortBuilder;

TEST_SUITE("features") {

TEST_CASE("per-course z-scores: forced example, zero-sd rule") {
    // Course logins {10, 20, 30}: sample SD is 10, so the 30-login student
    // sits at z = +1.
    CohortBuilder b;
    b.student("S1").student("S2").student("S3");
    for (const char* id : {"S1", "S2", "S3"}) b.enroll(id, "C1");
    b.daily_events("S1", "C1", 10).daily_events("S2", "C1", 20).daily_events("S3", "C1", 30);
    auto cohort = b.build();
    const auto vol = feat::normalized_login_volume(cohort, 3);
    REQUIRE(vol[2].has_value());
    CHECK(vol[2]->mean == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(vol[0]->mean == doctest::Approx(-1.0).epsilon(1e-9));

    // Everyone at 7 logins: SD = 0, every z is 0.
    CohortBuilder same;
    same.student("S1").student("S2").student("S3");
    for (const char* id : {"S1", "S2", "S3"}) {
        same.enroll(id, "C1");
        same.daily_events(id, "C1", 7);
    }
    const auto flat = feat::normalized_login_volume(same.build(), 3);
    for (int i = 0; i < 3; ++i) CHECK(flat[i]->mean == 0.0);
}

TEST_CASE("tiny courses are excluded; no eligible course gives a sentinel") {
    CohortBuilder b;
    b.student("S1").student("S2");
    b.enroll("S1", "C1").enroll("S2", "C1");  // only 2 enrolled, threshold 3
    b.daily_events("S1", "C1", 5).daily_events("S2", "C1", 9);
    const auto vol = feat::normalized_login_volume(b.build(), 3);
    CHECK(!vol[0].has_value());
    CHECK(!vol[1].has_value());
}

TEST_CASE("course stats include zero-count enrollees and non-sample students") {
    CohortBuilder b;
    b.student("S1");
    b.enroll("S1", "C1").enroll("X1", "C1").enroll("X2", "C1");
    b.daily_events("S1", "C1", 6);
    b.event("X1", "C1", "2019-09-03T10:00:00");
    // X2 is enrolled but never logs in: counts are {6, 1, 0}.
    const auto stats_map = feat::course_login_stats(b.build(), 3);
    REQUIRE(stats_map.count("C1"));
    CHECK(stats_map.at("C1").n_enrolled == 3);
    CHECK(stats_map.at("C1").mean == doctest::Approx(7.0 / 3.0));
}

TEST_CASE("full-course z-scores have mean 0 and sample sd 1") {
    auto spec = synth::default_spec();
    spec.n_students = 400;
    const auto [cohort, truth] = synth::generate_cohort(spec, 3);
    const auto counts = feat::login_counts(cohort);
    const auto course_stats = feat::course_login_stats(cohort, 3);
    for (const auto& [course, cs] : course_stats) {
        if (cs.sd <= 0.0) continue;
        std::vector<double> z;
        for (const auto& e : cohort.enrollments) {
            if (e.course_id != course) continue;
            auto it = counts.find({e.student_id, e.course_id});
            const double v = it == counts.end() ? 0.0 : static_cast<double>(it->second);
            z.push_back((v - cs.mean) / cs.sd);
        }
        REQUIRE(z.size() == cs.n_enrolled);
        CHECK(std::fabs(stats::mean(z)) < 1e-9);
        CHECK(std::fabs(stats::sample_sd(z) - 1.0) < 1e-9);
    }
}

TEST_CASE("z-scores are invariant to adding a constant to every count in a course") {
    CohortBuilder a, b;
    for (auto* builder : {&a, &b}) {
        builder->student("S1").student("S2").student("S3");
        for (const char* id : {"S1", "S2", "S3"}) builder->enroll(id, "C1");
    }
    a.daily_events("S1", "C1", 4).daily_events("S2", "C1", 9).daily_events("S3", "C1", 14);
    b.daily_events("S1", "C1", 9).daily_events("S2", "C1", 14).daily_events("S3", "C1", 19);
    const auto va = feat::normalized_login_volume(a.build(), 3);
    const auto vb = feat::normalized_login_volume(b.build(), 3);
    for (int i = 0; i < 3; ++i) {
        CHECK(va[i]->mean == doctest::Approx(vb[i]->mean).epsilon(1e-12));
        CHECK(va[i]->max == doctest::Approx(vb[i]->max).epsilon(1e-12));
    }
}

TEST_CASE("kl entropy hits analytic values for normal and uniform samples") {
    rng::Rng r(1234);
    std::vector<double> normal(10000), uniform(10000);
    for (auto& v : normal) v = r.normal();
    for (auto& v : uniform) v = r.uniform();
    const auto h_normal = feat::kl_entropy(normal, 3);
    const auto h_uniform = feat::kl_entropy(uniform, 3);
    REQUIRE(h_normal.has_value());
    REQUIRE(h_uniform.has_value());
    CHECK(std::fabs(*h_normal - 1.4189385332046727) < 0.05);  // (1/2) ln(2 pi e)
    CHECK(std::fabs(*h_uniform - 0.0) < 0.05);
}

TEST_CASE("kl entropy edge cases and invariances") {
    CHECK(!feat::kl_entropy(std::vector<double>{1.0, 1.0, 1.0}, 3).has_value());
    CHECK(!feat::kl_entropy(std::vector<double>{1.0, 2.0, 3.0}, 3).has_value());  // n < k+1
    CHECK(feat::kl_entropy(std::vector<double>{1.0, 2.0, 3.0, 4.5}, 3).has_value());

    rng::Rng r(77);
    std::vector<double> x(500);
    for (auto& v : x) v = r.lognormal(0.0, 0.7);
    auto shuffled = x;
    r.shuffle(shuffled);
    CHECK(*feat::kl_entropy(x, 3) == doctest::Approx(*feat::kl_entropy(shuffled, 3)));

    // Scaling by a > 0 shifts differential entropy by log(a).
    std::vector<double> scaled(x);
    for (auto& v : scaled) v *= 2.5;
    CHECK(*feat::kl_entropy(scaled, 3) ==
          doctest::Approx(*feat::kl_entropy(x, 3) + std::log(2.5)).epsilon(1e-9));
}

TEST_CASE("login regularity orders metronome vs irregular students") {
    // One student logs in exactly every 24h; the other at uniform(12,36)h
    // intervals. The Monte Carlo oracle is the entropy of the interval
    // samples themselves.
    CohortBuilder b;
    b.student("REG").student("IRR").student("PAD");
    for (const char* id : {"REG", "IRR", "PAD"}) b.enroll(id, "C1");
    b.daily_events("REG", "C1", 30);
    rng::Rng r(5);
    std::int64_t t = *timeutil::parse_date("2019-09-02");
    for (int k = 0; k < 30; ++k) {
        b.event("IRR", "C1", timeutil::format_timestamp(t));
        t += static_cast<std::int64_t>(r.uniform(12.0, 36.0) * 3600.0);
    }
    const auto reg = feat::login_regularity(b.build(), 3);
    REQUIRE(reg[0].has_value());
    REQUIRE(reg[1].has_value());
    CHECK(reg[0]->mean < reg[1]->mean);

    // Two courses with identical interval multisets: per-course entropies
    // equal, so the across-course SD is zero.
    CohortBuilder two;
    two.student("S1");
    two.enroll("S1", "C1").enroll("S1", "C2");
    const int offset_minutes[12] = {0, 24, 66, 12, 54, 102, 18, 78, 36, 114, 48, 90};
    for (int k = 0; k < 12; ++k) {
        const std::int64_t base = *timeutil::parse_date("2019-09-02") + k * 26 * 3600 +
                                  offset_minutes[k] * 60;
        two.event("S1", "C1", timeutil::format_timestamp(base));
        two.event("S1", "C2", timeutil::format_timestamp(base + 3600));
    }
    const auto both = feat::login_regularity(two.build(), 3);
    REQUIRE(both[0].has_value());
    CHECK(both[0]->sd == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("chronotype features: bands, weekday/weekend, normalization") {
    CohortBuilder b;
    b.student("S1");
    b.enroll("S1", "C1");
    for (int k = 0; k < 40; ++k) {
        const std::int64_t day = *timeutil::parse_date("2019-09-02") +
                                 (k % 30) * timeutil::kSecondsPerDay;
        b.event("S1", "C1", timeutil::format_timestamp(day + 13 * 3600 + 30 * 60));
    }
    const auto cf = feat::chronotype_features(b.build());
    REQUIRE(cf[0].profile.has_value());
    CHECK((*cf[0].profile)[13] == doctest::Approx(100.0));  // 13:30 falls in H14
    CHECK(cf[0].band_means[2] > 0.0);                       // T3 = 12PM-6PM
    CHECK(cf[0].band_means[0] == 0.0);
    CHECK(cf[0].band_means[1] == 0.0);
    CHECK(cf[0].band_means[3] == 0.0);

    // Saturday-only logger.
    CohortBuilder sat;
    sat.student("S1");
    sat.enroll("S1", "C1");
    for (int w = 0; w < 6; ++w) {
        const std::int64_t saturday = *timeutil::parse_date("2019-08-31") +
                                      w * 7 * timeutil::kSecondsPerDay;
        sat.event("S1", "C1", timeutil::format_timestamp(saturday + 11 * 3600));
    }
    const auto sf = feat::chronotype_features(sat.build());
    CHECK(sf[0].weekday_mean == 0.0);
    CHECK(sf[0].weekend_mean > 0.0);

    // Identical timing across 2 vs 4 courses: normalization by course count
    // makes the band values match.
    CohortBuilder two, four;
    two.student("S1");
    four.student("S1");
    for (int c = 1; c <= 2; ++c) {
        two.enroll("S1", "C" + std::to_string(c));
        two.daily_events("S1", "C" + std::to_string(c), 10, 15);
    }
    for (int c = 1; c <= 4; ++c) {
        four.enroll("S1", "C" + std::to_string(c));
        four.daily_events("S1", "C" + std::to_string(c), 10, 15);
    }
    const auto f2 = feat::chronotype_features(two.build());
    const auto f4 = feat::chronotype_features(four.build());
    for (int band = 0; band < 4; ++band)
        CHECK(f2[0].band_means[band] == doctest::Approx(f4[0].band_means[band]).epsilon(1e-12));
    CHECK(f2[0].weekday_mean == doctest::Approx(f4[0].weekday_mean).epsilon(1e-12));
}

TEST_CASE("zero-login student gets sentinel profile and imputed features") {
    CohortBuilder b;
    b.student("S1").student("S2").student("S3");
    for (const char* id : {"S1", "S2", "S3"}) b.enroll(id, "C1");
    b.daily_events("S1", "C1", 10).daily_events("S2", "C1", 16);
    auto cohort = b.build();
    const auto cf = feat::chronotype_features(cohort);
    CHECK(!cf[2].profile.has_value());

    const auto fm = feat::build_feature_matrix(cohort);
    CHECK(fm.X.allFinite());
    const auto flag_col = static_cast<Eigen::Index>(fm.col("profile_missing"));
    CHECK(fm.X(2, flag_col) == 1.0);
    CHECK(fm.X(0, flag_col) == 0.0);
}

TEST_CASE("feature matrix shape, hourly sum, demographics encoding") {
    auto spec = synth::default_spec();
    spec.n_students = 150;
    const auto [cohort, truth] = synth::generate_cohort(spec, 17);
    const auto fm = feat::build_feature_matrix(cohort);

    CHECK(fm.student_ids.size() == 150);
    CHECK(fm.X.allFinite());
    CHECK(fm.columns.size() == static_cast<std::size_t>(fm.X.cols()));

    // One indicator column per binary demographic, reference dropped.
    CHECK(fm.family_cols("demographics").size() == 9);  // 8 indicators + age
    CHECK(fm.family_cols("login_volume").size() == 7);
    CHECK(fm.family_cols("login_regularity").size() == 7);
    CHECK(fm.family_cols("hourly_profile").size() == 24);
    CHECK(fm.family_cols("weekday_weekend").size() == 2);
    CHECK(fm.family_cols("time_bands").size() == 4);

    const auto hours = fm.family_cols("hourly_profile");
    const auto missing = static_cast<Eigen::Index>(fm.col("profile_missing"));
    for (Eigen::Index i = 0; i < fm.X.rows(); ++i) {
        if (fm.X(i, missing) != 0.0) continue;
        double total = 0.0;
        for (auto h : hours) total += fm.X(i, static_cast<Eigen::Index>(h));
        CHECK(total == doctest::Approx(100.0).epsilon(1e-9));
    }
}

TEST_CASE("single-student cohort degenerates gracefully") {
    CohortBuilder b;
    b.student("S1");
    b.enroll("S1", "C1").enroll("X1", "C1").enroll("X2", "C1");
    b.daily_events("S1", "C1", 8);
    const auto fm = feat::build_feature_matrix(b.build());
    CHECK(fm.student_ids.size() == 1);
    CHECK(fm.X.allFinite());
    // A single z-score observation: sd-dependent statistics fall back to 0.
    CHECK(fm.X(0, static_cast<Eigen::Index>(fm.col("vol_sd"))) == 0.0);
    CHECK(fm.X(0, static_cast<Eigen::Index>(fm.col("vol_skew"))) == 0.0);
}

TEST_CASE("duplicate student ids are rejected") {
    CohortBuilder b;
    b.student("S1").student("S1");
    auto cohort = b.build();
    CHECK_THROWS_AS(feat::build_feature_matrix(cohort), DataError);
}

}  // TEST_SUITE
