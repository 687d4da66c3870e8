#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "lms/causal/graph.hpp"
#include "lms/core/cohort.hpp"
#include "lms/core/rng.hpp"

namespace lms::synth {

struct EdgeCoef {
    std::string cause;
    std::string effect;
    double coef = 0.0;
};

// Hidden common cause of a pair of observed variables.
struct LatentConfounder {
    std::string name;
    std::string first;
    std::string second;
    double coef_first = 1.0;
    double coef_second = 1.0;
};

struct HourlyTemplate {
    std::string name;
    std::array<double, 24> percent{};  // hour-of-day shares, sum 100
    double weight = 1.0;               // mixing weight
};

// Multiplies one archetype's mixing weight for students matching a
// demographic value, e.g. {"enrollment_type", "PartTime", 0, 2.2}.
struct ArchetypeTilt {
    std::string field;
    std::string value;
    std::size_t archetype = 0;
    double factor = 1.0;
};

// Pure linear-Gaussian structural causal model over named variables.
// Sampling is deterministic per (model, seed): every node draws from its own
// derived stream, so adding a node never shifts another node's values.
struct ScmModel {
    std::vector<std::string> nodes;
    std::vector<EdgeCoef> edges;
    std::map<std::string, double> noise_sd;   // default 1.0
    std::map<std::string, double> intercept;  // default 0.0

    // Throws ConfigError on a cycle or an edge naming an unknown node.
    std::vector<std::size_t> topological_order() const;

    // Columns follow `nodes`; preset columns are taken as-is (exogenous).
    Eigen::MatrixXd sample(std::size_t n, std::uint64_t seed,
                           const std::map<std::string, std::vector<double>>& preset = {}) const;
};

// Everything the generator needs: planted structural model, demographic
// marginals, chronotype archetypes, and event-realization knobs.
struct ScmSpec {
    std::size_t n_students = 1651;

    // Category orders: {Male, Female}, {White, Asian, Minority},
    // years {1,2,3,4}, {Regular, Transfer}, {FullTime, PartTime},
    // courses enrolled {3,4,5,6}.
    std::array<double, 2> gender_marginal{0.79, 0.21};
    std::array<double, 3> ethnicity_marginal{0.38, 0.30, 0.32};
    std::array<double, 4> year_marginal{0.07, 0.20, 0.31, 0.42};
    std::array<double, 2> admit_marginal{0.59, 0.41};
    std::array<double, 2> enrollment_marginal{0.88, 0.12};
    std::array<double, 4> course_count_weights{0.18, 0.33, 0.30, 0.19};

    std::vector<EdgeCoef> edge_coefficients;
    std::map<std::string, double> noise_sds;
    std::map<std::string, double> intercepts;
    std::vector<LatentConfounder> latent_confounders;

    std::vector<HourlyTemplate> chronotype_archetypes;
    std::vector<ArchetypeTilt> archetype_tilts;

    // Event realization.
    std::size_t course_pool = 0;        // 0 derives max(6, n/4)
    double course_log_mean = 4.0;       // ~55 logins per course over the term
    double course_log_sd = 0.30;        // between-course design variation
    double volume_log_scale = 0.45;     // login_volume latent -> log count
    double nb_dispersion = 12.0;        // negative-binomial size
    double gap_sigma_base = 0.45;       // log-normal gap dispersion at regularity 0
    double gap_sigma_scale = 0.50;
    double nonlinearity = 0.60;         // planted interaction into end_gpa
    double start_gpa_missing_rate = 0.08;

    core::SemesterWindow window{};  // default_spec fills Fall-2019-shaped dates
    std::int64_t cutoff = 0;
};

// Bundled defaults: 1651 students, Table-1-shaped marginals, Fig-8-shaped
// edges (login_volume -> end_gpa at 0.19), 239:560:889 archetype mixing.
ScmSpec default_spec();

// Throws ConfigError on invalid marginals, non-positive noise, malformed
// archetypes, or a cyclic edge set.
void validate_spec(const ScmSpec& spec);

struct GroundTruth {
    causal::CausalGraph true_dag;  // observed + latent nodes, tail/arrow marks
    std::vector<std::string> latent_set;
    std::map<std::string, std::vector<double>> planted;  // per-student values, sample order
    std::vector<int> cluster_labels;                     // archetype index per student
};

std::pair<core::Cohort, GroundTruth> generate_cohort(const ScmSpec& spec, std::uint64_t seed);

// Marginalized ground-truth graph over observed variables: directed edges for
// the planted coefficients plus a bidirected edge per hidden confounder pair.
causal::CausalGraph ground_truth_graph(const ScmSpec& spec);

// Timestamps whose hour-of-day distribution follows `profile` (percent per
// hour-of-day), days uniform over the window. Throws ConfigError on an empty
// window.
std::vector<std::int64_t> sample_login_timestamps(const std::array<double, 24>& profile,
                                                  std::size_t count, std::int64_t window_start,
                                                  std::int64_t window_end, rng::Rng& rng);

}  // namespace lms::synth
