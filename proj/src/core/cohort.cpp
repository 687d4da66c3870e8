#include "lms/core/cohort.hpp"

#include <algorithm>
#include <filesystem>
#include <set>
#include <sstream>
#include <unordered_set>

#include "lms/core/csv.hpp"
#include "lms/core/time.hpp"

namespace lms::core {
namespace {

namespace fs = std::filesystem;

template <typename T>
T parse_enum(const std::string& s, const std::string& file, std::size_t row,
             const std::string& column, std::initializer_list<std::pair<const char*, T>> table) {
    for (const auto& [name, value] : table)
        if (s == name) return value;
    throw DataError(file + ": row " + std::to_string(row) + ", column '" + column +
                    "': invalid value '" + s + "'");
}

double parse_gpa(const std::string& s, const std::string& file, std::size_t row,
                 const std::string& column) {
    auto v = csv::parse_double(s);
    if (!v || !(*v >= 0.0 && *v <= 4.0))
        throw DataError(file + ": row " + std::to_string(row) + ", column '" + column +
                        "': GPA '" + s + "' outside [0,4]");
    return *v;
}

}  // namespace

const char* to_string(Gender g) { return g == Gender::Male ? "Male" : "Female"; }

const char* to_string(Ethnicity e) {
    switch (e) {
        case Ethnicity::White: return "White";
        case Ethnicity::Asian: return "Asian";
        default: return "Minority";
    }
}

const char* to_string(AdmitType a) { return a == AdmitType::Regular ? "Regular" : "Transfer"; }

const char* to_string(EnrollmentType e) {
    return e == EnrollmentType::FullTime ? "FullTime" : "PartTime";
}

const StudentRecord* Cohort::find_student(const std::string& id) const {
    auto it = index_.find(id);
    return it == index_.end() ? nullptr : &students[it->second];
}

void Cohort::rebuild_index() {
    index_.clear();
    index_.reserve(students.size());
    for (std::size_t i = 0; i < students.size(); ++i) index_.emplace(students[i].student_id, i);
}

Cohort load_cohort(const std::string& dir, const SemesterWindow& window, std::int64_t cutoff,
                   LoadReport* report) {
    for (const char* name : {"demographics.csv", "enrollments.csv", "login_events.csv", "grades.csv"})
        if (!fs::exists(fs::path(dir) / name))
            throw DataError("missing input file: " + (fs::path(dir) / name).string());

    Cohort c;
    c.semester_window = window;
    c.cutoff = cutoff;

    // demographics
    {
        const auto t = csv::read_file((fs::path(dir) / "demographics.csv").string());
        const auto id = t.col("student_id"), gen = t.col("gender"), eth = t.col("ethnicity"),
                   yr = t.col("student_year"), adm = t.col("admit_type"),
                   enr = t.col("enrollment_type"), age = t.col("age");
        for (std::size_t r = 0; r < t.rows.size(); ++r) {
            const auto& row = t.rows[r];
            const std::size_t line = r + 2;
            StudentRecord s;
            s.student_id = row[id];
            if (s.student_id.empty())
                throw DataError(t.path + ": row " + std::to_string(line) + ": empty student_id");
            s.gender = parse_enum<Gender>(row[gen], t.path, line, "gender",
                                          {{"Male", Gender::Male}, {"Female", Gender::Female}});
            s.ethnicity = parse_enum<Ethnicity>(row[eth], t.path, line, "ethnicity",
                                                {{"White", Ethnicity::White},
                                                 {"Asian", Ethnicity::Asian},
                                                 {"Minority", Ethnicity::Minority}});
            auto year = csv::parse_int(row[yr]);
            if (!year || *year < 1 || *year > 4)
                throw DataError(t.path + ": row " + std::to_string(line) +
                                ", column 'student_year': invalid value '" + row[yr] + "'");
            s.student_year = static_cast<int>(*year);
            s.admit_type = parse_enum<AdmitType>(
                row[adm], t.path, line, "admit_type",
                {{"Regular", AdmitType::Regular}, {"Transfer", AdmitType::Transfer}});
            s.enrollment_type = parse_enum<EnrollmentType>(
                row[enr], t.path, line, "enrollment_type",
                {{"FullTime", EnrollmentType::FullTime}, {"PartTime", EnrollmentType::PartTime}});
            auto a = csv::parse_double(row[age]);
            if (!a || *a <= 0.0)
                throw DataError(t.path + ": row " + std::to_string(line) +
                                ", column 'age': invalid value '" + row[age] + "'");
            s.age = *a;
            c.students.push_back(std::move(s));
        }
    }
    std::sort(c.students.begin(), c.students.end(),
              [](const StudentRecord& a, const StudentRecord& b) { return a.student_id < b.student_id; });
    for (std::size_t i = 1; i < c.students.size(); ++i)
        if (c.students[i].student_id == c.students[i - 1].student_id)
            throw DataError("demographics.csv: duplicate student_id '" + c.students[i].student_id + "'");
    c.rebuild_index();

    // grades joined onto the sample
    {
        const auto t = csv::read_file((fs::path(dir) / "grades.csv").string());
        const auto id = t.col("student_id"), sg = t.col("start_gpa"), eg = t.col("end_term_gpa");
        std::vector<std::string> unknown;
        std::unordered_set<std::string> graded;
        for (std::size_t r = 0; r < t.rows.size(); ++r) {
            const auto& row = t.rows[r];
            const std::size_t line = r + 2;
            auto* student = const_cast<StudentRecord*>(c.find_student(row[id]));
            if (!student) {
                unknown.push_back(row[id]);
                continue;
            }
            if (!row[sg].empty()) student->start_gpa = parse_gpa(row[sg], t.path, line, "start_gpa");
            student->end_term_gpa = parse_gpa(row[eg], t.path, line, "end_term_gpa");
            graded.insert(row[id]);
        }
        if (!unknown.empty()) {
            std::ostringstream msg;
            msg << "grades.csv: " << unknown.size() << " row(s) with unknown student_id:";
            for (const auto& u : unknown) msg << ' ' << u;
            throw DataError(msg.str());
        }
        for (const auto& s : c.students)
            if (!graded.count(s.student_id))
                throw DataError("grades.csv: no grade row for student '" + s.student_id + "'");
    }

    // enrollments
    {
        const auto t = csv::read_file((fs::path(dir) / "enrollments.csv").string());
        const auto id = t.col("student_id"), course = t.col("course_id");
        std::set<std::pair<std::string, std::string>> seen;
        for (std::size_t r = 0; r < t.rows.size(); ++r) {
            const auto& row = t.rows[r];
            if (row[id].empty() || row[course].empty())
                throw DataError(t.path + ": row " + std::to_string(r + 2) + ": empty id field");
            if (!seen.emplace(row[id], row[course]).second)
                throw DataError(t.path + ": duplicate enrollment (" + row[id] + ", " + row[course] + ")");
            c.enrollments.push_back({row[id], row[course]});
        }
    }
    std::set<std::pair<std::string, std::string>> enrolled;
    for (const auto& e : c.enrollments) enrolled.emplace(e.student_id, e.course_id);

    // login events
    {
        const auto t = csv::read_file((fs::path(dir) / "login_events.csv").string());
        const auto id = t.col("student_id"), course = t.col("course_id"), ts = t.col("timestamp");
        for (std::size_t r = 0; r < t.rows.size(); ++r) {
            const auto& row = t.rows[r];
            const std::size_t line = r + 2;
            if (report) ++report->event_rows_read;
            if (row[id].empty() || row[course].empty())
                throw DataError(t.path + ": row " + std::to_string(line) + ": empty id field");
            auto stamp = timeutil::parse_timestamp(row[ts]);
            if (!stamp)
                throw DataError(t.path + ": row " + std::to_string(line) +
                                ", column 'timestamp': malformed value '" + row[ts] + "'");
            if (*stamp < window.start || *stamp >= window.end) {
                if (report)
                    report->rejected.push_back({t.path, line, "timestamp outside semester window"});
                continue;
            }
            if (c.in_sample(row[id]) && !enrolled.count({row[id], row[course]})) {
                if (report)
                    report->rejected.push_back(
                        {t.path, line, "sample student not enrolled in course " + row[course]});
                continue;
            }
            c.events.push_back({row[id], row[course], *stamp});
        }
    }
    return c;
}

ValidationReport validate_cohort(const Cohort& c, std::size_t min_course_enrollment) {
    ValidationReport rep;
    rep.n_students = c.students.size();
    rep.n_enrollments = c.enrollments.size();
    rep.n_events = c.events.size();

    std::unordered_map<std::string, std::size_t> course_enrollment;
    for (const auto& e : c.enrollments) ++course_enrollment[e.course_id];
    rep.n_courses = course_enrollment.size();

    std::unordered_set<std::string> active;
    for (const auto& ev : c.events) {
        active.insert(ev.student_id);
        if (!c.in_sample(ev.student_id)) ++rep.orphan_events;
        if (ev.timestamp < c.semester_window.start || ev.timestamp >= c.semester_window.end)
            rep.fatal.push_back("event outside semester window for student " + ev.student_id);
    }
    if (rep.orphan_events > 0)
        rep.warnings.push_back({"orphan-events", std::to_string(rep.orphan_events) +
                                                     " event(s) from students outside the sample"});

    for (const auto& s : c.students) {
        if (!active.count(s.student_id)) ++rep.zero_login_students;
        if (s.end_term_gpa < 0.0 || s.end_term_gpa > 4.0)
            rep.fatal.push_back("end_term_gpa outside [0,4] for student " + s.student_id);
        if (s.start_gpa && (*s.start_gpa < 0.0 || *s.start_gpa > 4.0))
            rep.fatal.push_back("start_gpa outside [0,4] for student " + s.student_id);
    }
    if (rep.zero_login_students > 0)
        rep.warnings.push_back(
            {"zero-login student", std::to_string(rep.zero_login_students) +
                                       " sample student(s) with zero login events"});

    std::vector<std::string> tiny;
    for (const auto& [course, n] : course_enrollment)
        if (n < min_course_enrollment) tiny.push_back(course);
    std::sort(tiny.begin(), tiny.end());
    rep.tiny_courses = tiny;
    if (!tiny.empty()) {
        std::string msg = std::to_string(tiny.size()) + " course(s) below enrollment threshold " +
                          std::to_string(min_course_enrollment) + ":";
        for (const auto& t : tiny) msg += ' ' + t;
        rep.warnings.push_back({"tiny-course", msg});
    }
    return rep;
}

void save_cohort(const Cohort& c, const std::string& dir) {
    fs::create_directories(dir);
    {
        csv::Writer w({"student_id", "gender", "ethnicity", "student_year", "admit_type",
                       "enrollment_type", "age"});
        for (const auto& s : c.students)
            w.add_row({s.student_id, to_string(s.gender), to_string(s.ethnicity),
                       std::to_string(s.student_year), to_string(s.admit_type),
                       to_string(s.enrollment_type), csv::format_double(s.age)});
        w.write_file((fs::path(dir) / "demographics.csv").string());
    }
    {
        csv::Writer w({"student_id", "course_id"});
        for (const auto& e : c.enrollments) w.add_row({e.student_id, e.course_id});
        w.write_file((fs::path(dir) / "enrollments.csv").string());
    }
    {
        csv::Writer w({"student_id", "course_id", "timestamp"});
        for (const auto& ev : c.events)
            w.add_row({ev.student_id, ev.course_id, timeutil::format_timestamp(ev.timestamp)});
        w.write_file((fs::path(dir) / "login_events.csv").string());
    }
    {
        csv::Writer w({"student_id", "start_gpa", "end_term_gpa"});
        for (const auto& s : c.students)
            w.add_row({s.student_id, s.start_gpa ? csv::format_double(*s.start_gpa) : "",
                       csv::format_double(s.end_term_gpa)});
        w.write_file((fs::path(dir) / "grades.csv").string());
    }
}

}  // namespace lms::core
