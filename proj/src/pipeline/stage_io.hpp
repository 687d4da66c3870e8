#pragma once

// Internal artifact I/O shared by the pipeline stages and the report writer.

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lms/causal/causal.hpp"
#include "lms/core/csv.hpp"
#include "lms/features/features.hpp"
#include "lms/pipeline/pipeline.hpp"

namespace lms::pipeline::io {

using ordered_json = nlohmann::ordered_json;

inline std::filesystem::path artifact(const std::string& out_dir, const std::string& rel) {
    return std::filesystem::path(out_dir) / rel;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw StageError("cannot write artifact: " + path.string());
    out << text;
}

inline std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw StageError("cannot read artifact: " + path.string());
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

inline void write_json(const std::filesystem::path& path, const ordered_json& j) {
    write_text(path, j.dump(2) + "\n");
}

inline ordered_json read_json(const std::filesystem::path& path) {
    try {
        return ordered_json::parse(read_text(path));
    } catch (const nlohmann::json::exception& e) {
        throw StageError("malformed artifact " + path.string() + ": " + e.what());
    }
}

// Demands an upstream artifact, naming the stage that produces it.
inline std::filesystem::path require(const std::string& out_dir, const std::string& rel,
                                     const std::string& producer) {
    auto p = artifact(out_dir, rel);
    if (!std::filesystem::exists(p))
        throw StageError("missing " + rel + ": run " + producer + " first");
    return p;
}

void save_features(const feat::FeatureMatrix& fm, const std::string& out_dir);
feat::FeatureMatrix load_features(const std::string& out_dir);

ordered_json graph_to_json(const causal::CausalGraph& g,
                           const std::vector<causal::EdgeRemoval>& removals,
                           const std::vector<std::string>& warnings);
causal::CausalGraph graph_from_json(const ordered_json& j);
std::string graph_to_dot(const causal::CausalGraph& g, const std::string& name);

}  // namespace lms::pipeline::io

namespace lms::pipeline::detail {

// Defined in report.cpp; assembles report.md from the JSON artifacts.
StageResult stage_report(const PipelineConfig& config);

}  // namespace lms::pipeline::detail
