#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lms/pipeline/config.hpp"

namespace lms::pipeline {

enum class Stage { Generate, Extract, Cluster, Train, Explain, Cca, Discover, Sem, Report };

const char* to_string(Stage s);
Stage stage_from_name(const std::string& name);  // throws ConfigError

// Stages in execution order; Generate only when the config uses the
// generator.
std::vector<Stage> planned_stages(const PipelineConfig& config);

struct StageResult {
    Stage stage;
    std::vector<std::string> files;  // artifact paths relative to out_dir
    bool skipped = false;            // outputs existed with matching checksums
};

// Runs one stage against existing upstream artifacts. A missing upstream
// artifact raises StageError naming the stage that produces it.
StageResult run_stage(const PipelineConfig& config, Stage stage);

// Runs every planned stage in order; stages whose outputs already exist with
// matching manifest checksums are skipped. Artifacts and their content
// hashes are recorded in artifacts.json.
std::vector<StageResult> run_pipeline(const PipelineConfig& config);

// FNV-1a 64 content hash, hex-encoded (the manifest checksum).
std::string file_hash(const std::string& path);

}  // namespace lms::pipeline
