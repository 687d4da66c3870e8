#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lms/causal/causal.hpp"
#include "lms/core/cohort.hpp"
#include "lms/predict/predict.hpp"
#include "lms/synth/synth.hpp"

namespace lms::pipeline {

struct ClusteringConfig {
    std::size_t kmin = 1;
    std::size_t kmax = 8;
    int band = 3;
};

struct LimeConfig {
    std::size_t n_samples = 500;
    double perturb_scale = 0.3;
};

struct CausalConfig {
    double alpha = 0.05;
    int max_cond = 3;
    causal::KnowledgeTiers knowledge;
    std::vector<causal::PagOverride> pag_overrides;
};

struct PipelineConfig {
    std::uint64_t seed = 0;
    std::string out_dir;
    std::string input_dir;  // empty when the generator provides the data
    bool use_generator = false;
    synth::ScmSpec generator;
    core::SemesterWindow window{};
    std::int64_t cutoff = 0;
    std::size_t entropy_k = 3;
    std::size_t min_course_enrollment = 3;
    ClusteringConfig clustering;
    predict::ModelGrids grids;
    LimeConfig lime;
    std::vector<double> mcca_penalty_fractions{0.0, 0.05, 0.15, 0.3, 0.5, 0.7, 1.0};
    CausalConfig causal;
    int threads = 1;

    // Directory the extract stage reads the four CSVs from.
    std::string data_dir() const;
};

// Moderate search spaces sized for a single-machine run; the full published
// spaces are available via "preset": "paper".
predict::ModelGrids default_grids();

// Parses and validates the JSON config. Missing seed, missing cutoff, or an
// unknown stage reference throw ConfigError before any stage runs.
PipelineConfig load_config(const std::string& path);
PipelineConfig parse_config(const std::string& json_text, const std::string& label);

// The bundled default configuration (synthetic cohort, moderate grids).
std::string default_config_json();

}  // namespace lms::pipeline
