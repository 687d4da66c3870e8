#include "lms/synth/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <unordered_map>

#include "lms/core/time.hpp"

namespace lms::synth {
namespace {

using core::Cohort;
using core::StudentRecord;

constexpr const char* kBuiltins[] = {"start_gpa", "regularity", "login_volume", "end_gpa"};

const std::vector<std::string>& demographic_indicators() {
    static const std::vector<std::string> kNames = {
        "gender_female", "ethnicity_asian", "ethnicity_minority", "year_2",
        "year_3",        "year_4",          "admit_transfer",     "enroll_parttime",
        "age",
    };
    return kNames;
}

bool is_demographic(const std::string& name) {
    const auto& d = demographic_indicators();
    return std::find(d.begin(), d.end(), name) != d.end();
}

double indicator_value(const StudentRecord& s, const std::string& name) {
    if (name == "gender_female") return s.gender == core::Gender::Female ? 1.0 : 0.0;
    if (name == "ethnicity_asian") return s.ethnicity == core::Ethnicity::Asian ? 1.0 : 0.0;
    if (name == "ethnicity_minority") return s.ethnicity == core::Ethnicity::Minority ? 1.0 : 0.0;
    if (name == "year_2") return s.student_year == 2 ? 1.0 : 0.0;
    if (name == "year_3") return s.student_year == 3 ? 1.0 : 0.0;
    if (name == "year_4") return s.student_year == 4 ? 1.0 : 0.0;
    if (name == "admit_transfer") return s.admit_type == core::AdmitType::Transfer ? 1.0 : 0.0;
    if (name == "enroll_parttime")
        return s.enrollment_type == core::EnrollmentType::PartTime ? 1.0 : 0.0;
    if (name == "age") return s.age;
    throw ConfigError("unknown demographic indicator '" + name + "'");
}

template <std::size_t N>
void check_marginal(const std::array<double, N>& m, const char* what) {
    double total = 0.0;
    for (double p : m) {
        if (p < 0.0) throw ConfigError(std::string(what) + ": negative probability");
        total += p;
    }
    if (std::fabs(total - 1.0) > 1e-9)
        throw ConfigError(std::string(what) + ": probabilities sum to " + std::to_string(total) +
                          ", expected 1");
}

std::string student_id_for(std::size_t index, std::size_t n) {
    int width = 4;
    for (std::size_t v = n; v >= 10000 && width < 12; v /= 10) ++width;
    char buf[24];
    std::snprintf(buf, sizeof(buf), "S%0*llu", width, static_cast<unsigned long long>(index + 1));
    return buf;
}

std::string course_id_for(std::size_t index) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "C%04zu", index + 1);
    return buf;
}

// The planted nonlinear term on end_gpa: an exclusive-or of login volume and
// centered prior GPA. Its two main effects cancel, so linear learners see
// almost none of it while depth-2 trees recover it.
double interaction_term(double volume, double start_gpa_centered) {
    const bool hi_v = volume > 0.0;
    const bool hi_g = start_gpa_centered > 0.0;
    return (hi_v != hi_g) ? 0.5 : -0.5;
}

std::string demographic_field_value(const StudentRecord& s, const std::string& field) {
    if (field == "gender") return core::to_string(s.gender);
    if (field == "ethnicity") return core::to_string(s.ethnicity);
    if (field == "admit_type") return core::to_string(s.admit_type);
    if (field == "enrollment_type") return core::to_string(s.enrollment_type);
    if (field == "student_year") return std::to_string(s.student_year);
    throw ConfigError("archetype tilt references unknown field '" + field + "'");
}

}  // namespace

std::vector<std::size_t> ScmModel::topological_order() const {
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < nodes.size(); ++i) index[nodes[i]] = i;
    const std::size_t n = nodes.size();
    std::vector<std::vector<std::size_t>> children(n);
    std::vector<std::size_t> indegree(n, 0);
    for (const auto& e : edges) {
        auto c = index.find(e.cause);
        auto f = index.find(e.effect);
        if (c == index.end() || f == index.end())
            throw ConfigError("edge references unknown variable: " + e.cause + " -> " + e.effect);
        children[c->second].push_back(f->second);
        ++indegree[f->second];
    }
    std::vector<std::size_t> ready;
    for (std::size_t i = 0; i < n; ++i)
        if (indegree[i] == 0) ready.push_back(i);
    std::sort(ready.begin(), ready.end());
    std::vector<std::size_t> order;
    while (!ready.empty()) {
        const std::size_t v = ready.front();
        ready.erase(ready.begin());
        order.push_back(v);
        for (std::size_t c : children[v])
            if (--indegree[c] == 0) {
                ready.push_back(c);
                std::sort(ready.begin(), ready.end());
            }
    }
    if (order.size() != n) throw ConfigError("cyclic edge_coefficients");
    return order;
}

Eigen::MatrixXd ScmModel::sample(std::size_t n, std::uint64_t seed,
                                 const std::map<std::string, std::vector<double>>& preset) const {
    const auto order = topological_order();
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < nodes.size(); ++i) index[nodes[i]] = i;

    Eigen::MatrixXd data(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(nodes.size()));
    data.setZero();
    for (std::size_t v : order) {
        const std::string& name = nodes[v];
        auto pre = preset.find(name);
        if (pre != preset.end()) {
            if (pre->second.size() != n)
                throw ConfigError("preset column '" + name + "' has wrong length");
            for (std::size_t r = 0; r < n; ++r) data(static_cast<Eigen::Index>(r), v) = pre->second[r];
            continue;
        }
        auto sd_it = noise_sd.find(name);
        const double sd = sd_it == noise_sd.end() ? 1.0 : sd_it->second;
        if (sd <= 0.0) throw ConfigError("noise sd for '" + name + "' must be > 0");
        auto ic_it = intercept.find(name);
        const double ic = ic_it == intercept.end() ? 0.0 : ic_it->second;

        rng::Rng stream(seed, "scm:" + name);
        for (std::size_t r = 0; r < n; ++r)
            data(static_cast<Eigen::Index>(r), v) = ic + sd * stream.normal();
        for (const auto& e : edges) {
            if (e.effect != name) continue;
            const std::size_t p = index.at(e.cause);
            data.col(static_cast<Eigen::Index>(v)) += e.coef * data.col(static_cast<Eigen::Index>(p));
        }
    }
    return data;
}

ScmSpec default_spec() {
    ScmSpec s;
    s.edge_coefficients = {
        {"regularity", "login_volume", -0.45},
        {"login_volume", "end_gpa", 0.19},
        {"start_gpa", "end_gpa", 0.50},
        {"regularity", "end_gpa", -0.15},
        {"admit_transfer", "start_gpa", -0.20},
        {"ethnicity_minority", "start_gpa", -0.15},
        {"enroll_parttime", "regularity", 0.30},
    };
    s.noise_sds = {
        {"start_gpa", 0.62},
        {"regularity", 0.95},
        {"login_volume", 0.893},
        {"end_gpa", 0.50},
    };
    s.intercepts = {
        {"start_gpa", 2.95},
        {"end_gpa", 1.38},
    };

    auto make = [](const char* name, std::initializer_list<double> raw, double weight) {
        HourlyTemplate t;
        t.name = name;
        t.weight = weight;
        double total = 0.0;
        std::size_t i = 0;
        for (double v : raw) {
            t.percent[i++] = v;
            total += v;
        }
        for (auto& v : t.percent) v = v / total * 100.0;
        return t;
    };
    // Mixing weights follow the 239:560:889 cluster sizes.
    s.chronotype_archetypes = {
        make("afternoon_to_night",
             {12.0, 9.0, 5.5, 3.0, 1.5, 1.0, 1.0, 1.2, 1.8, 2.2, 2.6, 3.0,
              3.4, 3.8, 4.2, 4.4, 4.6, 4.8, 5.0, 5.4, 6.0, 7.0, 8.5, 10.2},
             239.0),
        make("afternoon_to_evening",
             {3.0, 2.0, 1.2, 0.8, 0.7, 0.8, 1.2, 2.0, 3.0, 4.0, 4.8, 5.6,
              6.4, 7.2, 7.8, 7.8, 7.2, 6.2, 5.2, 5.0, 5.2, 5.4, 4.8, 3.6},
             560.0),
        make("active_afternoon",
             {0.4, 0.25, 0.2, 0.2, 0.3, 0.8, 1.8, 3.6, 5.6, 7.0, 7.8, 8.2,
              8.6, 9.0, 9.4, 9.2, 8.6, 7.4, 5.6, 3.4, 1.6, 0.7, 0.35, 0.3},
             889.0),
    };
    s.archetype_tilts = {
        {"enrollment_type", "PartTime", 0, 2.2},
        {"gender", "Female", 2, 1.5},
        {"ethnicity", "Asian", 1, 1.4},
        {"ethnicity", "Minority", 0, 1.3},
        {"student_year", "3", 0, 1.4},
        {"student_year", "4", 0, 1.8},
    };

    // Fall-2019-shaped semester: Aug 28 through Dec 10, cutoff Oct 14.
    s.window.start = *timeutil::parse_date("2019-08-28");
    s.window.end = *timeutil::parse_date("2019-12-10");
    s.cutoff = *timeutil::parse_date("2019-10-14");
    return s;
}

void validate_spec(const ScmSpec& spec) {
    check_marginal(spec.gender_marginal, "gender_marginal");
    check_marginal(spec.ethnicity_marginal, "ethnicity_marginal");
    check_marginal(spec.year_marginal, "year_marginal");
    check_marginal(spec.admit_marginal, "admit_marginal");
    check_marginal(spec.enrollment_marginal, "enrollment_marginal");
    check_marginal(spec.course_count_weights, "course_count_weights");
    for (const auto& [name, sd] : spec.noise_sds)
        if (sd <= 0.0) throw ConfigError("noise sd for '" + name + "' must be > 0");
    if (spec.chronotype_archetypes.empty())
        throw ConfigError("at least one chronotype archetype required");
    for (const auto& a : spec.chronotype_archetypes) {
        double total = 0.0;
        for (double v : a.percent) {
            if (v < 0.0) throw ConfigError("archetype '" + a.name + "': negative hour share");
            total += v;
        }
        if (std::fabs(total - 100.0) > 1e-9)
            throw ConfigError("archetype '" + a.name + "': hour shares sum to " +
                              std::to_string(total) + ", expected 100");
        if (a.weight <= 0.0) throw ConfigError("archetype '" + a.name + "': weight must be > 0");
    }
    for (const auto& t : spec.archetype_tilts)
        if (t.archetype >= spec.chronotype_archetypes.size())
            throw ConfigError("archetype tilt references archetype " + std::to_string(t.archetype));
    if (spec.window.end <= spec.window.start) throw ConfigError("empty semester window");
    if (spec.cutoff <= spec.window.start || spec.cutoff > spec.window.end)
        throw ConfigError("cutoff outside semester window");
    // Cycle check (throws).
    ScmModel model;
    std::set<std::string> names(std::begin(kBuiltins), std::end(kBuiltins));
    for (const auto& e : spec.edge_coefficients) {
        names.insert(e.cause);
        names.insert(e.effect);
    }
    for (const auto& l : spec.latent_confounders) {
        names.insert(l.name);
        names.insert(l.first);
        names.insert(l.second);
        model.edges.push_back({l.name, l.first, l.coef_first});
        model.edges.push_back({l.name, l.second, l.coef_second});
    }
    model.nodes.assign(names.begin(), names.end());
    for (const auto& e : spec.edge_coefficients) model.edges.push_back(e);
    model.topological_order();
}

namespace {

ScmModel build_model(const ScmSpec& spec) {
    ScmModel model;
    std::set<std::string> names(std::begin(kBuiltins), std::end(kBuiltins));
    for (const auto& e : spec.edge_coefficients) {
        names.insert(e.cause);
        names.insert(e.effect);
        model.edges.push_back(e);
    }
    for (const auto& [name, sd] : spec.noise_sds) names.insert(name);
    for (const auto& [name, ic] : spec.intercepts) names.insert(name);
    for (const auto& l : spec.latent_confounders) {
        names.insert(l.name);
        names.insert(l.first);
        names.insert(l.second);
        model.edges.push_back({l.name, l.first, l.coef_first});
        model.edges.push_back({l.name, l.second, l.coef_second});
    }
    model.nodes.assign(names.begin(), names.end());
    model.noise_sd = spec.noise_sds;
    model.intercept = spec.intercepts;
    return model;
}

// Full planted DAG, latent nodes included.
causal::CausalGraph ground_truth_full_dag(const ScmSpec& spec) {
    const ScmModel model = build_model(spec);
    causal::CausalGraph g(model.nodes);
    for (const auto& e : model.edges)
        g.add_directed(g.require_index(e.cause), g.require_index(e.effect));
    return g;
}

}  // namespace

std::pair<Cohort, GroundTruth> generate_cohort(const ScmSpec& spec, std::uint64_t seed) {
    validate_spec(spec);
    const std::size_t n = spec.n_students;

    Cohort cohort;
    cohort.semester_window = spec.window;
    cohort.cutoff = spec.cutoff;
    cohort.students.reserve(n);

    // Demographics, one stream per student.
    for (std::size_t i = 0; i < n; ++i) {
        rng::Rng r(seed, "demographics", i);
        StudentRecord s;
        s.student_id = student_id_for(i, n);
        s.gender = r.categorical(spec.gender_marginal) == 0 ? core::Gender::Male : core::Gender::Female;
        switch (r.categorical(spec.ethnicity_marginal)) {
            case 0: s.ethnicity = core::Ethnicity::White; break;
            case 1: s.ethnicity = core::Ethnicity::Asian; break;
            default: s.ethnicity = core::Ethnicity::Minority; break;
        }
        s.student_year = static_cast<int>(r.categorical(spec.year_marginal)) + 1;
        s.admit_type = r.categorical(spec.admit_marginal) == 0 ? core::AdmitType::Regular
                                                               : core::AdmitType::Transfer;
        s.enrollment_type = r.categorical(spec.enrollment_marginal) == 0
                                ? core::EnrollmentType::FullTime
                                : core::EnrollmentType::PartTime;
        s.age = 17.0 + s.student_year + (s.admit_type == core::AdmitType::Transfer ? 2.0 : 0.0) +
                std::floor(std::min(12.0, r.exponential(0.45)));
        cohort.students.push_back(std::move(s));
    }

    // Chronotype archetype assignment with demographic tilts.
    const std::size_t n_arch = spec.chronotype_archetypes.size();
    std::vector<int> labels(n, -1);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> w(n_arch);
        for (std::size_t a = 0; a < n_arch; ++a) w[a] = spec.chronotype_archetypes[a].weight;
        for (const auto& tilt : spec.archetype_tilts)
            if (demographic_field_value(cohort.students[i], tilt.field) == tilt.value)
                w[tilt.archetype] *= tilt.factor;
        rng::Rng r(seed, "archetype", i);
        labels[i] = static_cast<int>(r.categorical(w));
    }

    // Planted continuous variables from the structural model.
    ScmModel model = build_model(spec);
    std::map<std::string, std::vector<double>> preset;
    for (const auto& name : model.nodes) {
        if (!is_demographic(name)) continue;
        std::vector<double> col(n);
        for (std::size_t i = 0; i < n; ++i) col[i] = indicator_value(cohort.students[i], name);
        preset[name] = std::move(col);
    }
    Eigen::MatrixXd data = spec.n_students == 0
                               ? Eigen::MatrixXd(0, static_cast<Eigen::Index>(model.nodes.size()))
                               : model.sample(n, seed, preset);
    auto col_of = [&model](const std::string& name) {
        for (std::size_t i = 0; i < model.nodes.size(); ++i)
            if (model.nodes[i] == name) return static_cast<Eigen::Index>(i);
        throw ConfigError("model missing variable '" + name + "'");
    };
    const Eigen::Index c_vol = col_of("login_volume");
    const Eigen::Index c_reg = col_of("regularity");
    const Eigen::Index c_sg = col_of("start_gpa");
    const Eigen::Index c_eg = col_of("end_gpa");

    if (spec.nonlinearity != 0.0) {
        auto ic = spec.intercepts.find("start_gpa");
        const double gpa_center = ic == spec.intercepts.end() ? 0.0 : ic->second;
        for (std::size_t i = 0; i < n; ++i)
            data(static_cast<Eigen::Index>(i), c_eg) +=
                spec.nonlinearity *
                interaction_term(data(static_cast<Eigen::Index>(i), c_vol),
                                 data(static_cast<Eigen::Index>(i), c_sg) - gpa_center);
    }
    for (std::size_t i = 0; i < n; ++i) {
        auto clamp_gpa = [](double v) { return std::min(4.0, std::max(0.0, v)); };
        data(static_cast<Eigen::Index>(i), c_sg) = clamp_gpa(data(static_cast<Eigen::Index>(i), c_sg));
        data(static_cast<Eigen::Index>(i), c_eg) = clamp_gpa(data(static_cast<Eigen::Index>(i), c_eg));
    }

    // Grades; start GPA sometimes unavailable for transfers and freshmen.
    for (std::size_t i = 0; i < n; ++i) {
        auto& s = cohort.students[i];
        s.end_term_gpa = data(static_cast<Eigen::Index>(i), c_eg);
        rng::Rng r(seed, "gpamiss", i);
        const bool eligible =
            s.admit_type == core::AdmitType::Transfer || s.student_year == 1;
        if (eligible && r.uniform() < spec.start_gpa_missing_rate)
            s.start_gpa.reset();
        else
            s.start_gpa = data(static_cast<Eigen::Index>(i), c_sg);
    }

    // Course assignment and event realization.
    const std::size_t pool = spec.course_pool > 0 ? spec.course_pool : std::max<std::size_t>(6, n / 4);
    std::vector<double> course_log_mu(pool);
    for (std::size_t j = 0; j < pool; ++j) {
        rng::Rng r(seed, "course", j);
        course_log_mu[j] = r.normal(spec.course_log_mean, spec.course_log_sd);
    }

    static const std::array<int, 4> kCourseCounts = {3, 4, 5, 6};
    const double span = static_cast<double>(spec.window.end - spec.window.start);
    for (std::size_t i = 0; i < n; ++i) {
        rng::Rng r(seed, "courses", i);
        const int want = kCourseCounts[r.categorical(spec.course_count_weights)];
        const auto picks =
            r.sample_without_replacement(pool, std::min<std::size_t>(want, pool));
        const double volume = data(static_cast<Eigen::Index>(i), c_vol);
        const double regularity = data(static_cast<Eigen::Index>(i), c_reg);
        const double sigma = spec.gap_sigma_base * std::exp(spec.gap_sigma_scale * regularity);
        const auto& profile = spec.chronotype_archetypes[static_cast<std::size_t>(labels[i])].percent;

        for (std::size_t j : picks) {
            cohort.enrollments.push_back({cohort.students[i].student_id, course_id_for(j)});
            rng::Rng er(seed, "events", i * pool + j);
            const double mean_count = std::exp(course_log_mu[j] + spec.volume_log_scale * volume);
            const std::uint64_t count = er.negative_binomial(mean_count, spec.nb_dispersion);
            if (count == 0) continue;

            // Day placement via normalized log-normal gaps: small sigma gives
            // near-even spacing, large sigma gives bursts.
            std::vector<double> cum(count + 1);
            double acc = 0.0;
            for (std::size_t k = 0; k <= count; ++k) {
                acc += er.lognormal(0.0, sigma);
                cum[k] = acc;
            }
            for (std::size_t k = 0; k < count; ++k) {
                const double frac = cum[k] / acc;
                const std::int64_t pos =
                    spec.window.start + static_cast<std::int64_t>(frac * (span - 1.0));
                const std::int64_t day_start = pos - (pos % timeutil::kSecondsPerDay);
                const int hour = static_cast<int>(er.categorical(profile));
                const int minute = static_cast<int>(er.uniform_int(0, 59));
                std::int64_t t = day_start + hour * 3600 + minute * 60;
                if (t < spec.window.start) t = spec.window.start;
                if (t >= spec.window.end) t = spec.window.end - 60;
                cohort.events.push_back({cohort.students[i].student_id, course_id_for(j), t});
            }
        }
    }
    std::sort(cohort.enrollments.begin(), cohort.enrollments.end(),
              [](const core::Enrollment& a, const core::Enrollment& b) {
                  return std::tie(a.student_id, a.course_id) < std::tie(b.student_id, b.course_id);
              });
    std::sort(cohort.events.begin(), cohort.events.end(),
              [](const core::LoginEvent& a, const core::LoginEvent& b) {
                  return std::tie(a.student_id, a.course_id, a.timestamp) <
                         std::tie(b.student_id, b.course_id, b.timestamp);
              });
    cohort.rebuild_index();

    GroundTruth truth{ground_truth_full_dag(spec), {}, {}, labels};
    for (const auto& l : spec.latent_confounders) truth.latent_set.push_back(l.name);
    for (std::size_t v = 0; v < model.nodes.size(); ++v) {
        std::vector<double> col(n);
        for (std::size_t i = 0; i < n; ++i) col[i] = data(static_cast<Eigen::Index>(i), v);
        truth.planted[model.nodes[v]] = std::move(col);
    }
    return {std::move(cohort), std::move(truth)};
}

causal::CausalGraph ground_truth_graph(const ScmSpec& spec) {
    std::set<std::string> observed(std::begin(kBuiltins), std::end(kBuiltins));
    for (const auto& e : spec.edge_coefficients) {
        observed.insert(e.cause);
        observed.insert(e.effect);
    }
    std::set<std::string> hidden;
    for (const auto& l : spec.latent_confounders) {
        hidden.insert(l.name);
        observed.insert(l.first);
        observed.insert(l.second);
    }
    for (const auto& h : hidden) observed.erase(h);

    causal::CausalGraph g(std::vector<std::string>(observed.begin(), observed.end()));
    for (const auto& e : spec.edge_coefficients)
        if (!hidden.count(e.cause) && !hidden.count(e.effect))
            g.add_directed(g.require_index(e.cause), g.require_index(e.effect));
    for (const auto& l : spec.latent_confounders)
        g.add_bidirected(g.require_index(l.first), g.require_index(l.second));
    return g;
}

std::vector<std::int64_t> sample_login_timestamps(const std::array<double, 24>& profile,
                                                  std::size_t count, std::int64_t window_start,
                                                  std::int64_t window_end, rng::Rng& rng) {
    if (window_end <= window_start) throw ConfigError("empty window");
    const std::int64_t days = std::max<std::int64_t>(
        1, (window_end - window_start) / timeutil::kSecondsPerDay);
    std::vector<std::int64_t> out;
    out.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
        const std::int64_t day = rng.uniform_int(0, days - 1);
        const int hour = static_cast<int>(rng.categorical(profile));
        const int minute = static_cast<int>(rng.uniform_int(0, 59));
        std::int64_t t =
            window_start + day * timeutil::kSecondsPerDay + hour * 3600 + minute * 60;
        if (t >= window_end) t = window_end - 60;
        out.push_back(t);
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace lms::synth
