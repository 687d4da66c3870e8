#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "lms/core/error.hpp"

namespace lms::core {

enum class Gender { Male, Female };
enum class Ethnicity { White, Asian, Minority };
enum class AdmitType { Regular, Transfer };
enum class EnrollmentType { FullTime, PartTime };

const char* to_string(Gender g);
const char* to_string(Ethnicity e);
const char* to_string(AdmitType a);
const char* to_string(EnrollmentType e);

// One course access; campus-local wall-clock seconds since epoch.
struct LoginEvent {
    std::string student_id;
    std::string course_id;
    std::int64_t timestamp = 0;
};

struct Enrollment {
    std::string student_id;
    std::string course_id;
};

struct StudentRecord {
    std::string student_id;
    Gender gender = Gender::Male;
    Ethnicity ethnicity = Ethnicity::White;
    int student_year = 1;  // 1..4
    AdmitType admit_type = AdmitType::Regular;
    EnrollmentType enrollment_type = EnrollmentType::FullTime;
    double age = 18.0;
    std::optional<double> start_gpa;  // absent for some transfer/freshman records
    double end_term_gpa = 0.0;
};

struct SemesterWindow {
    std::int64_t start = 0;  // inclusive
    std::int64_t end = 0;    // exclusive
};

// The study sample plus every login/enrollment seen by the LMS. Events and
// enrollments may reference students outside the sample; course-level
// normalization statistics deliberately include them. Immutable once built;
// safe for concurrent readers.
struct Cohort {
    std::vector<StudentRecord> students;  // study sample, sorted by student_id
    std::vector<Enrollment> enrollments;
    std::vector<LoginEvent> events;
    SemesterWindow semester_window;
    std::int64_t cutoff = 0;  // mid-semester; feature ops truncate here

    const StudentRecord* find_student(const std::string& id) const;
    bool in_sample(const std::string& id) const { return find_student(id) != nullptr; }

    void rebuild_index();

private:
    std::unordered_map<std::string, std::size_t> index_;
};

struct RejectedRow {
    std::string file;
    std::size_t row = 0;  // 1-based data-file line number
    std::string reason;
};

struct LoadReport {
    std::size_t event_rows_read = 0;
    std::vector<RejectedRow> rejected;
};

struct Warning {
    std::string code;
    std::string message;
};

struct ValidationReport {
    std::size_t n_students = 0;
    std::size_t n_enrollments = 0;
    std::size_t n_events = 0;
    std::size_t n_courses = 0;
    std::size_t zero_login_students = 0;
    std::size_t orphan_events = 0;  // events whose student is outside the sample
    std::vector<std::string> tiny_courses;
    std::vector<Warning> warnings;
    std::vector<std::string> fatal;

    bool ok() const { return fatal.empty(); }
};

// Reads demographics.csv, enrollments.csv, login_events.csv and grades.csv
// from `dir` and joins them. Throws DataError on: a missing file, malformed
// fields (naming row and column), duplicate (student, course) enrollments,
// GPA outside [0,4], or grades rows whose student_id has no demographics row
// (offenders listed). Events outside the semester window or referencing a
// non-enrollment of a sample student are rejected and itemized, not fatal.
Cohort load_cohort(const std::string& dir, const SemesterWindow& window, std::int64_t cutoff,
                   LoadReport* report = nullptr);

// Report-only sweep: orphan events, zero-login students, courses enrolling
// fewer than min_course_enrollment students, invariant breaches.
ValidationReport validate_cohort(const Cohort& c, std::size_t min_course_enrollment = 3);

// Writes the four CSVs load_cohort reads. load(save(c)) is an identity on
// every field.
void save_cohort(const Cohort& c, const std::string& dir);

}  // namespace lms::core
