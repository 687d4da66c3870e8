#include "lms/pipeline/config.hpp"

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "lms/core/time.hpp"

namespace lms::pipeline {
namespace {

using nlohmann::json;

std::int64_t parse_when(const json& j, const std::string& key) {
    const std::string s = j.get<std::string>();
    auto t = timeutil::parse_timestamp(s);
    if (!t) throw ConfigError("config: '" + key + "' is not a valid timestamp: " + s);
    return *t;
}

template <typename T>
std::vector<T> vec(const json& j) {
    return j.get<std::vector<T>>();
}

void apply_generator(synth::ScmSpec& spec, const json& g) {
    if (g.contains("n_students")) spec.n_students = g.at("n_students").get<std::size_t>();
    if (g.contains("nonlinearity")) spec.nonlinearity = g.at("nonlinearity").get<double>();
    if (g.contains("course_pool")) spec.course_pool = g.at("course_pool").get<std::size_t>();
    if (g.contains("volume_log_scale")) spec.volume_log_scale = g.at("volume_log_scale").get<double>();
    if (g.contains("nb_dispersion")) spec.nb_dispersion = g.at("nb_dispersion").get<double>();
    if (g.contains("gap_sigma_base")) spec.gap_sigma_base = g.at("gap_sigma_base").get<double>();
    if (g.contains("gap_sigma_scale")) spec.gap_sigma_scale = g.at("gap_sigma_scale").get<double>();
    if (g.contains("start_gpa_missing_rate"))
        spec.start_gpa_missing_rate = g.at("start_gpa_missing_rate").get<double>();
    if (g.contains("edge_coefficients")) {
        spec.edge_coefficients.clear();
        for (const auto& e : g.at("edge_coefficients"))
            spec.edge_coefficients.push_back({e.at("cause").get<std::string>(),
                                              e.at("effect").get<std::string>(),
                                              e.at("coef").get<double>()});
    }
    if (g.contains("noise_sds"))
        for (auto it = g.at("noise_sds").begin(); it != g.at("noise_sds").end(); ++it)
            spec.noise_sds[it.key()] = it.value().get<double>();
    if (g.contains("intercepts"))
        for (auto it = g.at("intercepts").begin(); it != g.at("intercepts").end(); ++it)
            spec.intercepts[it.key()] = it.value().get<double>();
    if (g.contains("latent_confounders")) {
        spec.latent_confounders.clear();
        for (const auto& l : g.at("latent_confounders"))
            spec.latent_confounders.push_back(
                {l.at("name").get<std::string>(), l.at("first").get<std::string>(),
                 l.at("second").get<std::string>(),
                 l.value("coef_first", 1.0), l.value("coef_second", 1.0)});
    }
}

void apply_grids(predict::ModelGrids& grids, const json& m) {
    if (m.contains("preset")) {
        const std::string preset = m.at("preset").get<std::string>();
        if (preset == "paper") grids = predict::ModelGrids::paper_defaults();
        else if (preset == "default") grids = default_grids();
        else throw ConfigError("config: unknown models preset '" + preset + "'");
    }
    if (m.contains("elastic_net")) {
        const auto& e = m.at("elastic_net");
        if (e.contains("alpha")) grids.elastic_net.alpha = vec<double>(e.at("alpha"));
        if (e.contains("lambda")) grids.elastic_net.lambda = vec<double>(e.at("lambda"));
    }
    if (m.contains("tree")) {
        const auto& e = m.at("tree");
        if (e.contains("max_depth")) grids.tree.max_depth = vec<int>(e.at("max_depth"));
        if (e.contains("min_leaf")) grids.tree.min_leaf = vec<int>(e.at("min_leaf"));
    }
    if (m.contains("forest")) {
        const auto& e = m.at("forest");
        if (e.contains("n_trees")) grids.forest.n_trees = vec<int>(e.at("n_trees"));
    }
    if (m.contains("gbt")) {
        const auto& e = m.at("gbt");
        if (e.contains("n_trees")) grids.gbt.n_trees = vec<int>(e.at("n_trees"));
        if (e.contains("learning_rate")) grids.gbt.learning_rate = vec<double>(e.at("learning_rate"));
        if (e.contains("max_depth")) grids.gbt.max_depth = vec<int>(e.at("max_depth"));
    }
}

}  // namespace

std::string PipelineConfig::data_dir() const {
    if (!use_generator) return input_dir;
    return (std::filesystem::path(out_dir) / "data").string();
}

predict::ModelGrids default_grids() {
    predict::ModelGrids g;
    g.elastic_net.alpha = {0.0, 0.25, 0.5, 0.75, 1.0};
    g.elastic_net.lambda = {1e-3, 1e-2, 1e-1};
    g.tree.max_depth = {3, 7, 11};
    g.tree.min_leaf = {5};
    g.forest.n_trees = {200};
    g.gbt.n_trees = {200};
    g.gbt.learning_rate = {0.05};
    g.gbt.max_depth = {3};
    return g;
}

PipelineConfig parse_config(const std::string& json_text, const std::string& label) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigError(label + ": invalid JSON: " + e.what());
    }

    PipelineConfig c;
    c.grids = default_grids();
    try {
        if (!j.contains("seed")) throw ConfigError(label + ": missing required key 'seed'");
        c.seed = j.at("seed").get<std::uint64_t>();
        if (!j.contains("out_dir")) throw ConfigError(label + ": missing required key 'out_dir'");
        c.out_dir = j.at("out_dir").get<std::string>();

        if (!j.contains("semester"))
            throw ConfigError(label + ": missing required key 'semester'");
        const auto& sem = j.at("semester");
        if (!sem.contains("start") || !sem.contains("end"))
            throw ConfigError(label + ": semester needs 'start' and 'end'");
        if (!sem.contains("cutoff"))
            throw ConfigError(label + ": semester needs a mid-term 'cutoff' date");
        c.window.start = parse_when(sem.at("start"), "semester.start");
        c.window.end = parse_when(sem.at("end"), "semester.end");
        c.cutoff = parse_when(sem.at("cutoff"), "semester.cutoff");
        if (c.window.end <= c.window.start)
            throw ConfigError(label + ": semester end precedes start");
        if (c.cutoff <= c.window.start || c.cutoff > c.window.end)
            throw ConfigError(label + ": cutoff outside the semester window");

        const bool has_input = j.contains("input_dir") && !j.at("input_dir").is_null();
        const bool has_gen = j.contains("generator");
        if (has_input == has_gen)
            throw ConfigError(label + ": exactly one of 'input_dir' or 'generator' required");
        if (has_input) {
            c.input_dir = j.at("input_dir").get<std::string>();
        } else {
            c.use_generator = true;
            c.generator = synth::default_spec();
            c.generator.window = c.window;
            c.generator.cutoff = c.cutoff;
            apply_generator(c.generator, j.at("generator"));
            synth::validate_spec(c.generator);
        }

        if (j.contains("entropy_k")) c.entropy_k = j.at("entropy_k").get<std::size_t>();
        if (c.entropy_k < 1) throw ConfigError(label + ": entropy_k must be >= 1");
        if (j.contains("min_course_enrollment"))
            c.min_course_enrollment = j.at("min_course_enrollment").get<std::size_t>();

        if (j.contains("clustering")) {
            const auto& cl = j.at("clustering");
            if (cl.contains("kmin")) c.clustering.kmin = cl.at("kmin").get<std::size_t>();
            if (cl.contains("kmax")) c.clustering.kmax = cl.at("kmax").get<std::size_t>();
            if (cl.contains("band")) c.clustering.band = cl.at("band").get<int>();
            if (c.clustering.kmin < 1 || c.clustering.kmin > c.clustering.kmax)
                throw ConfigError(label + ": clustering needs 1 <= kmin <= kmax");
        }
        if (j.contains("models")) apply_grids(c.grids, j.at("models"));
        predict::validate_grids(c.grids);

        if (j.contains("lime")) {
            const auto& l = j.at("lime");
            if (l.contains("n_samples")) c.lime.n_samples = l.at("n_samples").get<std::size_t>();
            if (l.contains("perturb_scale"))
                c.lime.perturb_scale = l.at("perturb_scale").get<double>();
            if (c.lime.n_samples < 30) throw ConfigError(label + ": lime.n_samples must be >= 30");
        }
        if (j.contains("mcca") && j.at("mcca").contains("penalty_fractions")) {
            c.mcca_penalty_fractions = vec<double>(j.at("mcca").at("penalty_fractions"));
            for (double f : c.mcca_penalty_fractions)
                if (f < 0.0 || f > 1.0)
                    throw ConfigError(label + ": mcca penalty fractions must lie in [0,1]");
            if (c.mcca_penalty_fractions.empty())
                throw ConfigError(label + ": mcca penalty grid must not be empty");
        }
        if (j.contains("causal")) {
            const auto& ca = j.at("causal");
            if (ca.contains("alpha")) c.causal.alpha = ca.at("alpha").get<double>();
            if (ca.contains("max_cond")) c.causal.max_cond = ca.at("max_cond").get<int>();
            if (ca.contains("tiers"))
                for (const auto& tier : ca.at("tiers"))
                    c.causal.knowledge.tiers.push_back(vec<std::string>(tier));
            if (ca.contains("forbidden"))
                for (const auto& e : ca.at("forbidden"))
                    c.causal.knowledge.forbidden.emplace_back(e.at(0).get<std::string>(),
                                                              e.at(1).get<std::string>());
            if (ca.contains("required"))
                for (const auto& e : ca.at("required"))
                    c.causal.knowledge.required.emplace_back(e.at(0).get<std::string>(),
                                                             e.at(1).get<std::string>());
            if (ca.contains("pag_overrides"))
                for (const auto& o : ca.at("pag_overrides")) {
                    causal::PagOverride ov;
                    ov.a = o.at("a").get<std::string>();
                    ov.b = o.at("b").get<std::string>();
                    const std::string orient = o.at("orient").get<std::string>();
                    if (orient == "a->b") ov.orient = causal::PagOverride::Orient::AtoB;
                    else if (orient == "b->a") ov.orient = causal::PagOverride::Orient::BtoA;
                    else if (orient == "<->") ov.orient = causal::PagOverride::Orient::Bidirected;
                    else throw ConfigError(label + ": pag override orient must be a->b, b->a or <->");
                    c.causal.pag_overrides.push_back(std::move(ov));
                }
        }
        if (j.contains("threads")) c.threads = std::max(1, j.at("threads").get<int>());
    } catch (const json::exception& e) {
        throw ConfigError(label + ": " + e.what());
    }
    return c;
}

PipelineConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_config(text, path);
}

std::string default_config_json() {
    return R"({
  "seed": 7,
  "out_dir": "out",
  "semester": {"start": "2019-08-28", "end": "2019-12-10", "cutoff": "2019-10-14"},
  "generator": {"n_students": 1651},
  "entropy_k": 3,
  "min_course_enrollment": 3,
  "clustering": {"kmin": 1, "kmax": 8, "band": 3},
  "models": {"preset": "default"},
  "lime": {"n_samples": 500, "perturb_scale": 0.3},
  "mcca": {"penalty_fractions": [0.0, 0.05, 0.15, 0.3, 0.5, 0.7, 1.0]},
  "causal": {
    "alpha": 0.05,
    "max_cond": 3,
    "tiers": [
      ["gender", "ethnicity", "student_year", "admit_type", "enrollment_type", "age"],
      ["start_gpa", "n_courses"],
      ["chronotype", "composite_volume", "composite_regularity", "composite_hourly", "composite_weekend"],
      ["end_term_gpa"]
    ],
    "forbidden": [],
    "required": [],
    "pag_overrides": []
  },
  "threads": 1
})";
}

}  // namespace lms::pipeline
