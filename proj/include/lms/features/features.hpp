#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lms/core/cohort.hpp"
#include "lms/core/stats.hpp"

namespace lms::feat {

// Per-course login statistics over ALL enrolled students (sample or not),
// events truncated at the cohort cutoff; enrolled students without events
// count zero. Courses below min_enrollment are excluded.
struct CourseStats {
    double mean = 0.0;
    double sd = 0.0;  // sample (n-1)
    std::size_t n_enrolled = 0;
};
std::map<std::string, CourseStats> course_login_stats(const core::Cohort& c,
                                                      std::size_t min_enrollment = 3);

// Pre-cutoff login count for every enrolled (student, course) pair.
std::map<std::pair<std::string, std::string>, std::size_t> login_counts(const core::Cohort& c);

// Z-score vector of a sample student across their eligible courses, reduced
// to the seven statistics. nullopt when the student has no eligible course.
std::vector<std::optional<stats::StatSeven>> normalized_login_volume(
    const core::Cohort& c, std::size_t min_enrollment = 3);

// Kozachenko-Leonenko k-nearest-neighbor differential entropy (nats) of a
// one-dimensional sample. Tied samples would zero out neighbor distances and
// break the log, so distances are floored at 1e-9 of the value scale; exact
// repetition therefore reads as very low finite entropy. nullopt when fewer
// than k+1 samples remain or every sample is exactly zero.
std::optional<double> kl_entropy(std::span<const double> samples, std::size_t k);

// Per-course inter-login interval entropies (hours; zero intervals dropped)
// reduced to the seven statistics. nullopt when no course has a defined
// entropy.
std::vector<std::optional<stats::StatSeven>> login_regularity(const core::Cohort& c,
                                                              std::size_t k = 3);

struct ChronotypeFeatures {
    std::optional<std::array<double, 24>> profile;  // percent per hour-of-day, sums to 100
    std::array<double, 4> band_means{};             // T1 12AM-6AM ... T4 6PM-12AM
    double weekday_mean = 0.0;
    double weekend_mean = 0.0;
};

// Hourly profile plus course-count-normalized mean daily login counts per
// time band and weekday/weekend, all truncated at the cutoff.
std::vector<ChronotypeFeatures> chronotype_features(const core::Cohort& c);

struct FeatureColumn {
    std::string name;
    std::string family;
    bool indicator = false;        // 0/1 column
    bool imputation_flag = false;  // marks a *_missing companion column
};

struct FeatureMatrix {
    std::vector<std::string> student_ids;  // row order
    std::vector<FeatureColumn> columns;
    Eigen::MatrixXd X;
    Eigen::VectorXd y;  // end_term_gpa

    std::size_t col(const std::string& name) const;
    std::vector<std::size_t> family_cols(const std::string& family) const;
};

struct FeatureOptions {
    std::size_t entropy_k = 3;
    std::size_t min_course_enrollment = 3;
};

// Assembles every feature family, one-hot demographics (reference category
// dropped), cohort-median imputation with companion missing flags. No NaN
// remains afterwards.
FeatureMatrix build_feature_matrix(const core::Cohort& c, const FeatureOptions& opts = {});

}  // namespace lms::feat
