#include "lms/features/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>
#include <unordered_map>

#include "lms/core/prob.hpp"
#include "lms/core/time.hpp"

namespace lms::feat {
namespace {

using core::Cohort;

// hour-of-day -> band index; T1 = 12AM-6AM, T2 = 6AM-12PM, T3 = 12PM-6PM,
// T4 = 6PM-12AM.
int band_of_hour(int h) { return h / 6; }

}  // namespace

std::map<std::pair<std::string, std::string>, std::size_t> login_counts(const Cohort& c) {
    std::map<std::pair<std::string, std::string>, std::size_t> counts;
    for (const auto& ev : c.events)
        if (ev.timestamp < c.cutoff) ++counts[{ev.student_id, ev.course_id}];
    return counts;
}

std::map<std::string, CourseStats> course_login_stats(const Cohort& c,
                                                      std::size_t min_enrollment) {
    const auto counts = login_counts(c);
    std::map<std::string, std::vector<double>> per_course;
    for (const auto& e : c.enrollments) {
        auto it = counts.find({e.student_id, e.course_id});
        per_course[e.course_id].push_back(
            it == counts.end() ? 0.0 : static_cast<double>(it->second));
    }
    std::map<std::string, CourseStats> out;
    for (const auto& [course, values] : per_course) {
        if (values.size() < min_enrollment) continue;
        CourseStats s;
        s.n_enrolled = values.size();
        s.mean = stats::mean(values);
        s.sd = stats::sample_sd(values);
        out[course] = s;
    }
    return out;
}

std::vector<std::optional<stats::StatSeven>> normalized_login_volume(const Cohort& c,
                                                                     std::size_t min_enrollment) {
    const auto counts = login_counts(c);
    const auto courses = course_login_stats(c, min_enrollment);

    std::unordered_map<std::string, std::vector<std::string>> enrolled_by_student;
    for (const auto& e : c.enrollments)
        if (c.in_sample(e.student_id)) enrolled_by_student[e.student_id].push_back(e.course_id);

    std::vector<std::optional<stats::StatSeven>> out(c.students.size());
    for (std::size_t i = 0; i < c.students.size(); ++i) {
        const auto& id = c.students[i].student_id;
        auto it = enrolled_by_student.find(id);
        std::vector<double> z;
        if (it != enrolled_by_student.end()) {
            auto sorted = it->second;
            std::sort(sorted.begin(), sorted.end());
            for (const auto& course : sorted) {
                auto cs = courses.find(course);
                if (cs == courses.end()) continue;  // tiny course, excluded
                auto cnt = counts.find({id, course});
                const double v = cnt == counts.end() ? 0.0 : static_cast<double>(cnt->second);
                z.push_back(cs->second.sd > 0.0 ? (v - cs->second.mean) / cs->second.sd : 0.0);
            }
        }
        if (!z.empty()) out[i] = stats::stat_seven(z);
    }
    return out;
}

std::optional<double> kl_entropy(std::span<const double> samples, std::size_t k) {
    if (k == 0) return std::nullopt;
    std::vector<double> x(samples.begin(), samples.end());
    const std::size_t n = x.size();
    if (n < k + 1) return std::nullopt;
    std::sort(x.begin(), x.end());

    // Tied samples give zero neighbor distances; distances are floored at a
    // tiny fraction of the value scale so exact repetition reads as very low
    // (but finite) entropy.
    const double scale = std::max(std::fabs(x.front()), std::fabs(x.back()));
    const double floor = 1e-9 * scale;
    if (floor <= 0.0) return std::nullopt;  // all samples are exactly zero

    // k-th nearest neighbor distance on the sorted line: expand left/right
    // from each point, always taking the nearer side.
    double log_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t lo = i, hi = i;
        double dist = 0.0;
        for (std::size_t step = 0; step < k; ++step) {
            const double dl = lo > 0 ? x[i] - x[lo - 1] : std::numeric_limits<double>::infinity();
            const double dr =
                hi + 1 < n ? x[hi + 1] - x[i] : std::numeric_limits<double>::infinity();
            if (dl <= dr) {
                --lo;
                dist = dl;
            } else {
                ++hi;
                dist = dr;
            }
        }
        log_sum += std::log(std::max(dist, floor));
    }
    const double dn = static_cast<double>(n);
    return prob::digamma(dn) - prob::digamma(static_cast<double>(k)) + std::log(2.0) +
           log_sum / dn;
}

std::vector<std::optional<stats::StatSeven>> login_regularity(const Cohort& c, std::size_t k) {
    // Pre-cutoff timestamps per enrolled (sample student, course); loader
    // guarantees sample events are enrolled.
    std::map<std::pair<std::string, std::string>, std::vector<std::int64_t>> times;
    for (const auto& ev : c.events)
        if (ev.timestamp < c.cutoff && c.in_sample(ev.student_id))
            times[{ev.student_id, ev.course_id}].push_back(ev.timestamp);

    std::unordered_map<std::string, std::vector<double>> per_student;
    for (auto& [key, stamps] : times) {
        std::sort(stamps.begin(), stamps.end());
        std::vector<double> intervals;
        intervals.reserve(stamps.size());
        for (std::size_t i = 1; i < stamps.size(); ++i) {
            const double hours = static_cast<double>(stamps[i] - stamps[i - 1]) / 3600.0;
            if (hours > 0.0) intervals.push_back(hours);
        }
        if (auto h = kl_entropy(intervals, k)) per_student[key.first].push_back(*h);
    }

    std::vector<std::optional<stats::StatSeven>> out(c.students.size());
    for (std::size_t i = 0; i < c.students.size(); ++i) {
        auto it = per_student.find(c.students[i].student_id);
        if (it != per_student.end() && !it->second.empty())
            out[i] = stats::stat_seven(it->second);
    }
    return out;
}

std::vector<ChronotypeFeatures> chronotype_features(const Cohort& c) {
    const std::int64_t start = c.semester_window.start;
    const std::int64_t cutoff = c.cutoff;
    double n_days = 0.0, n_weekdays = 0.0, n_weekend = 0.0;
    for (std::int64_t d = start; d < cutoff; d += timeutil::kSecondsPerDay) {
        n_days += 1.0;
        if (timeutil::is_weekend(d)) n_weekend += 1.0;
        else n_weekdays += 1.0;
    }
    n_days = std::max(n_days, 1.0);
    n_weekdays = std::max(n_weekdays, 1.0);
    n_weekend = std::max(n_weekend, 1.0);

    std::unordered_map<std::string, std::size_t> course_count;
    for (const auto& e : c.enrollments)
        if (c.in_sample(e.student_id)) ++course_count[e.student_id];

    struct Acc {
        std::array<double, 24> hours{};
        std::array<double, 4> bands{};
        double weekday = 0.0, weekend = 0.0, total = 0.0;
    };
    std::unordered_map<std::string, Acc> acc;
    for (const auto& ev : c.events) {
        if (ev.timestamp >= cutoff || !c.in_sample(ev.student_id)) continue;
        auto& a = acc[ev.student_id];
        const int h = timeutil::hour_of_day(ev.timestamp);
        a.hours[h] += 1.0;
        a.bands[band_of_hour(h)] += 1.0;
        (timeutil::is_weekend(ev.timestamp) ? a.weekend : a.weekday) += 1.0;
        a.total += 1.0;
    }

    std::vector<ChronotypeFeatures> out(c.students.size());
    for (std::size_t i = 0; i < c.students.size(); ++i) {
        const auto& id = c.students[i].student_id;
        auto cc = course_count.find(id);
        const double courses =
            cc == course_count.end() ? 1.0 : std::max<double>(1.0, static_cast<double>(cc->second));
        auto it = acc.find(id);
        if (it == acc.end() || it->second.total <= 0.0) continue;  // all-missing profile
        const Acc& a = it->second;
        ChronotypeFeatures f;
        std::array<double, 24> profile;
        for (int h = 0; h < 24; ++h) profile[h] = a.hours[h] / a.total * 100.0;
        f.profile = profile;
        for (int b = 0; b < 4; ++b) f.band_means[b] = a.bands[b] / n_days / courses;
        f.weekday_mean = a.weekday / n_weekdays / courses;
        f.weekend_mean = a.weekend / n_weekend / courses;
        out[i] = f;
    }
    return out;
}

std::size_t FeatureMatrix::col(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
        if (columns[i].name == name) return i;
    throw DataError("feature matrix has no column '" + name + "'");
}

std::vector<std::size_t> FeatureMatrix::family_cols(const std::string& family) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < columns.size(); ++i)
        if (columns[i].family == family) out.push_back(i);
    return out;
}

FeatureMatrix build_feature_matrix(const Cohort& c, const FeatureOptions& opts) {
    {
        std::set<std::string> ids;
        for (const auto& s : c.students)
            if (!ids.insert(s.student_id).second)
                throw DataError("duplicate student id '" + s.student_id + "'");
    }
    const auto volume = normalized_login_volume(c, opts.min_course_enrollment);
    const auto regularity = login_regularity(c, opts.entropy_k);
    const auto chrono = chronotype_features(c);

    std::unordered_map<std::string, double> course_count;
    for (const auto& e : c.enrollments)
        if (c.in_sample(e.student_id)) course_count[e.student_id] += 1.0;

    FeatureMatrix fm;
    const std::size_t n = c.students.size();
    fm.student_ids.reserve(n);
    for (const auto& s : c.students) fm.student_ids.push_back(s.student_id);

    auto add_col = [&fm](std::string name, std::string family, bool indicator = false,
                         bool flag = false) {
        fm.columns.push_back({std::move(name), std::move(family), indicator, flag});
    };
    for (const auto& s : stats::StatSeven::names()) add_col("vol_" + s, "login_volume");
    for (const auto& s : stats::StatSeven::names()) add_col("reg_" + s, "login_regularity");
    for (int b = 1; b <= 4; ++b) add_col("t" + std::to_string(b) + "_mean", "time_bands");
    add_col("weekday_mean", "weekday_weekend");
    add_col("weekend_mean", "weekday_weekend");
    for (int h = 1; h <= 24; ++h) {
        char buf[8];
        std::snprintf(buf, sizeof(buf), "h%02d", h);
        add_col(buf, "hourly_profile");
    }
    add_col("n_courses", "enrolled_courses");
    for (const char* d : {"gender_female", "ethnicity_asian", "ethnicity_minority", "year_2",
                          "year_3", "year_4", "admit_transfer", "enroll_parttime"})
        add_col(d, "demographics", true);
    add_col("age", "demographics");
    add_col("start_gpa", "start_gpa");
    add_col("start_gpa_missing", "imputation_flags", true, true);
    add_col("volume_missing", "imputation_flags", true, true);
    add_col("regularity_missing", "imputation_flags", true, true);
    add_col("profile_missing", "imputation_flags", true, true);

    const std::size_t p = fm.columns.size();
    const double nan = std::numeric_limits<double>::quiet_NaN();
    fm.X.setConstant(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p), nan);
    fm.y.resize(static_cast<Eigen::Index>(n));

    const std::size_t c_vol = fm.col("vol_mean"), c_reg = fm.col("reg_mean"),
                      c_t1 = fm.col("t1_mean"), c_wd = fm.col("weekday_mean"),
                      c_h = fm.col("h01"), c_nc = fm.col("n_courses"),
                      c_dem = fm.col("gender_female"), c_age = fm.col("age"),
                      c_sg = fm.col("start_gpa"), c_flag = fm.col("start_gpa_missing");

    for (std::size_t i = 0; i < n; ++i) {
        const auto& s = c.students[i];
        const auto r = static_cast<Eigen::Index>(i);
        if (volume[i]) {
            const auto v = volume[i]->values();
            for (std::size_t j = 0; j < 7; ++j) fm.X(r, c_vol + j) = v[j];
        }
        if (regularity[i]) {
            const auto v = regularity[i]->values();
            for (std::size_t j = 0; j < 7; ++j) fm.X(r, c_reg + j) = v[j];
        }
        for (int b = 0; b < 4; ++b) fm.X(r, c_t1 + b) = chrono[i].band_means[b];
        fm.X(r, c_wd) = chrono[i].weekday_mean;
        fm.X(r, c_wd + 1) = chrono[i].weekend_mean;
        if (chrono[i].profile)
            for (int h = 0; h < 24; ++h) fm.X(r, c_h + h) = (*chrono[i].profile)[h];
        auto cc = course_count.find(s.student_id);
        fm.X(r, c_nc) = cc == course_count.end() ? 0.0 : cc->second;
        fm.X(r, c_dem + 0) = s.gender == core::Gender::Female ? 1.0 : 0.0;
        fm.X(r, c_dem + 1) = s.ethnicity == core::Ethnicity::Asian ? 1.0 : 0.0;
        fm.X(r, c_dem + 2) = s.ethnicity == core::Ethnicity::Minority ? 1.0 : 0.0;
        fm.X(r, c_dem + 3) = s.student_year == 2 ? 1.0 : 0.0;
        fm.X(r, c_dem + 4) = s.student_year == 3 ? 1.0 : 0.0;
        fm.X(r, c_dem + 5) = s.student_year == 4 ? 1.0 : 0.0;
        fm.X(r, c_dem + 6) = s.admit_type == core::AdmitType::Transfer ? 1.0 : 0.0;
        fm.X(r, c_dem + 7) = s.enrollment_type == core::EnrollmentType::PartTime ? 1.0 : 0.0;
        fm.X(r, c_age) = s.age;
        if (s.start_gpa) fm.X(r, c_sg) = *s.start_gpa;
        fm.X(r, c_flag + 0) = s.start_gpa ? 0.0 : 1.0;
        fm.X(r, c_flag + 1) = volume[i] ? 0.0 : 1.0;
        fm.X(r, c_flag + 2) = regularity[i] ? 0.0 : 1.0;
        fm.X(r, c_flag + 3) = chrono[i].profile ? 0.0 : 1.0;
        fm.y(r) = s.end_term_gpa;
    }

    // Cohort-median imputation for sentinel rows.
    for (std::size_t j = 0; j < p; ++j) {
        std::vector<double> defined;
        for (std::size_t i = 0; i < n; ++i) {
            const double v = fm.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            if (std::isfinite(v)) defined.push_back(v);
        }
        const double fill = defined.empty() ? 0.0 : stats::median(defined);
        for (std::size_t i = 0; i < n; ++i) {
            auto& v = fm.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            if (!std::isfinite(v)) v = fill;
        }
    }
    return fm;
}

}  // namespace lms::feat
