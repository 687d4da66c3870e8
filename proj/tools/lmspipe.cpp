// lmspipe: student-centric LMS analytics pipeline.
//
//   lmspipe run      --config cfg.json        full pipeline, resumable
//   lmspipe <stage>  --config cfg.json        one stage against existing artifacts
//
// Stages: generate extract cluster train explain cca discover sem report.
// Exit codes: 0 success, 2 config error, 3 data validation error, 4 stage
// failure.

#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "lms/kernels/kernels.hpp"
#include "lms/pipeline/pipeline.hpp"

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_dir_override;
    long long seed_override = -1;
    int threads = 0;
    std::string kernels = "auto";
};

lms::pipeline::PipelineConfig load(const CommonArgs& args) {
    auto config = lms::pipeline::load_config(args.config_path);
    if (!args.out_dir_override.empty()) config.out_dir = args.out_dir_override;
    if (args.seed_override >= 0) config.seed = static_cast<std::uint64_t>(args.seed_override);
    if (args.threads > 0) config.threads = args.threads;
    if (args.kernels == "scalar") lms::kern::set_backend(lms::kern::Backend::Scalar);
    else if (args.kernels == "avx2") lms::kern::set_backend(lms::kern::Backend::Avx2);
    else lms::kern::set_backend(lms::kern::Backend::Auto);
    return config;
}

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "pipeline config (JSON)")->required();
    cmd->add_option("--out-dir", args.out_dir_override, "override the config's output directory");
    cmd->add_option("--seed", args.seed_override, "override the config's master seed");
    cmd->add_option("--threads", args.threads, "worker thread cap");
    cmd->add_option("--kernels", args.kernels, "kernel backend: auto|scalar|avx2")
        ->check(CLI::IsMember({"auto", "scalar", "avx2"}));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"student-centric LMS login analytics and causal discovery"};
    app.require_subcommand(1);

    CommonArgs args;
    std::string run_stage_name;

    CLI::App* run = app.add_subcommand("run", "run the full pipeline (resumable)");
    add_common(run, args);

    for (const char* stage : {"generate", "extract", "cluster", "train", "explain", "cca",
                              "discover", "sem", "report"}) {
        CLI::App* cmd = app.add_subcommand(stage, std::string("run the ") + stage + " stage");
        add_common(cmd, args);
        cmd->callback([&run_stage_name, stage] { run_stage_name = stage; });
    }

    CLI11_PARSE(app, argc, argv);

    try {
        const auto config = load(args);
        if (run->parsed()) {
            const auto results = lms::pipeline::run_pipeline(config);
            for (const auto& r : results)
                std::printf("%-9s %s\n", lms::pipeline::to_string(r.stage),
                            r.skipped ? "skipped (artifacts current)" : "done");
        } else {
            const auto stage = lms::pipeline::stage_from_name(run_stage_name);
            const auto r = lms::pipeline::run_stage(config, stage);
            std::printf("%-9s done\n", lms::pipeline::to_string(r.stage));
        }
        return 0;
    } catch (const lms::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const lms::DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "stage failure: %s\n", e.what());
        return 4;
    }
}
