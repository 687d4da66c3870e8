#include <cmath>
#include <sstream>

#include "stage_io.hpp"

namespace lms::pipeline::io {

void save_features(const feat::FeatureMatrix& fm, const std::string& out_dir) {
    std::vector<std::string> header{"student_id"};
    for (const auto& col : fm.columns) header.push_back(col.name);
    header.push_back("end_term_gpa");
    csv::Writer w(header);
    for (std::size_t i = 0; i < fm.student_ids.size(); ++i) {
        std::vector<std::string> row{fm.student_ids[i]};
        for (std::size_t j = 0; j < fm.columns.size(); ++j)
            row.push_back(csv::format_double(
                fm.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))));
        row.push_back(csv::format_double(fm.y(static_cast<Eigen::Index>(i))));
        w.add_row(row);
    }
    w.write_file(artifact(out_dir, "features.csv").string());

    ordered_json m;
    m["columns"] = ordered_json::array();
    for (const auto& col : fm.columns)
        m["columns"].push_back({{"name", col.name},
                                {"family", col.family},
                                {"indicator", col.indicator},
                                {"imputation_flag", col.imputation_flag}});
    write_json(artifact(out_dir, "manifest.json"), m);
}

feat::FeatureMatrix load_features(const std::string& out_dir) {
    const auto mpath = artifact(out_dir, "manifest.json");
    const auto fpath = artifact(out_dir, "features.csv");
    if (!std::filesystem::exists(mpath) || !std::filesystem::exists(fpath))
        throw StageError("missing features.csv: run extract first");
    const auto manifest = read_json(mpath);
    feat::FeatureMatrix fm;
    for (const auto& col : manifest.at("columns"))
        fm.columns.push_back({col.at("name").get<std::string>(),
                              col.at("family").get<std::string>(),
                              col.at("indicator").get<bool>(),
                              col.at("imputation_flag").get<bool>()});

    const auto t = csv::read_file(fpath.string());
    if (t.header.size() != fm.columns.size() + 2)
        throw StageError("features.csv does not match manifest.json");
    fm.X.resize(static_cast<Eigen::Index>(t.rows.size()),
                static_cast<Eigen::Index>(fm.columns.size()));
    fm.y.resize(static_cast<Eigen::Index>(t.rows.size()));
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        fm.student_ids.push_back(t.rows[i][0]);
        for (std::size_t j = 0; j < fm.columns.size(); ++j) {
            auto v = csv::parse_double(t.rows[i][j + 1]);
            if (!v) throw StageError("features.csv: bad numeric value in row " + std::to_string(i + 2));
            fm.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = *v;
        }
        fm.y(static_cast<Eigen::Index>(i)) = *csv::parse_double(t.rows[i].back());
    }
    return fm;
}

ordered_json graph_to_json(const causal::CausalGraph& g,
                           const std::vector<causal::EdgeRemoval>& removals,
                           const std::vector<std::string>& warnings) {
    ordered_json j;
    j["nodes"] = g.nodes();
    j["edges"] = ordered_json::array();
    for (const auto& e : g.edges())
        j["edges"].push_back({{"a", g.name(e.a)},
                              {"b", g.name(e.b)},
                              {"mark_a", causal::to_string(e.at_a)},
                              {"mark_b", causal::to_string(e.at_b)}});
    j["removals"] = ordered_json::array();
    for (const auto& r : removals) {
        ordered_json sep = ordered_json::array();
        for (std::size_t v : r.sepset) sep.push_back(g.name(v));
        j["removals"].push_back(
            {{"a", g.name(r.a)}, {"b", g.name(r.b)}, {"p", r.p}, {"sepset", sep}});
    }
    j["warnings"] = warnings;
    return j;
}

causal::CausalGraph graph_from_json(const ordered_json& j) {
    causal::CausalGraph g(j.at("nodes").get<std::vector<std::string>>());
    auto mark = [](const std::string& s) {
        if (s == "tail") return causal::Mark::Tail;
        if (s == "arrow") return causal::Mark::Arrow;
        return causal::Mark::Circle;
    };
    for (const auto& e : j.at("edges"))
        g.add_edge(g.require_index(e.at("a").get<std::string>()),
                   g.require_index(e.at("b").get<std::string>()),
                   mark(e.at("mark_a").get<std::string>()),
                   mark(e.at("mark_b").get<std::string>()));
    return g;
}

std::string graph_to_dot(const causal::CausalGraph& g, const std::string& name) {
    auto glyph = [](causal::Mark m) {
        switch (m) {
            case causal::Mark::Tail: return "none";
            case causal::Mark::Arrow: return "normal";
            default: return "odot";
        }
    };
    std::ostringstream out;
    out << "digraph " << name << " {\n";
    for (const auto& node : g.nodes()) out << "  \"" << node << "\";\n";
    for (const auto& e : g.edges()) {
        if (e.at_a == causal::Mark::Tail && e.at_b == causal::Mark::Arrow) {
            out << "  \"" << g.name(e.a) << "\" -> \"" << g.name(e.b) << "\";\n";
        } else if (e.at_b == causal::Mark::Tail && e.at_a == causal::Mark::Arrow) {
            out << "  \"" << g.name(e.b) << "\" -> \"" << g.name(e.a) << "\";\n";
        } else {
            out << "  \"" << g.name(e.a) << "\" -> \"" << g.name(e.b) << "\" [dir=both, arrowtail="
                << glyph(e.at_a) << ", arrowhead=" << glyph(e.at_b) << "];\n";
        }
    }
    out << "}\n";
    return out.str();
}

}  // namespace lms::pipeline::io

namespace lms::pipeline::detail {
namespace {

using io::ordered_json;

std::string fmt(double v, int digits = 3) {
    std::ostringstream out;
    out.precision(digits);
    out << std::fixed << v;
    return out.str();
}

std::string edge_glyph(const std::string& mark_a, const std::string& mark_b) {
    auto left = [&] {
        if (mark_a == "arrow") return "<";
        if (mark_a == "circle") return "o";
        return "-";
    }();
    auto right = [&] {
        if (mark_b == "arrow") return ">";
        if (mark_b == "circle") return "o";
        return "-";
    }();
    return std::string(left) + "-" + right;
}

void graph_section(std::ostringstream& md, const ordered_json& gj) {
    md << "| Edge | Marks |\n|---|---|\n";
    for (const auto& e : gj.at("edges")) {
        md << "| " << e.at("a").get<std::string>() << " "
           << edge_glyph(e.at("mark_a").get<std::string>(), e.at("mark_b").get<std::string>())
           << " " << e.at("b").get<std::string>() << " | " << e.at("mark_a").get<std::string>()
           << " / " << e.at("mark_b").get<std::string>() << " |\n";
    }
    md << "\n";
}

}  // namespace

StageResult stage_report(const PipelineConfig& config) {
    const std::string& out = config.out_dir;
    const auto validation = io::read_json(io::require(out, "validation.json", "extract"));
    const auto associations = io::read_json(io::require(out, "associations.json", "cluster"));
    const auto metrics = io::read_json(io::require(out, "model_metrics.json", "train"));
    const auto importance = io::read_json(io::require(out, "importance.json", "explain"));
    const auto weights = io::read_json(io::require(out, "mcca_weights.json", "cca"));
    const auto graphs = io::read_json(io::require(out, "graph.json", "discover"));
    const auto sem = io::read_json(io::require(out, "sem.json", "sem"));

    std::ostringstream md;
    md << "# Student-centric LMS analysis report\n\n";
    md << "Seed: " << config.seed << "\n\n";

    md << "## Cohort\n\n";
    md << "| Quantity | Value |\n|---|---|\n";
    for (const char* key : {"n_students", "n_enrollments", "n_events", "n_courses",
                            "zero_login_students", "orphan_events"})
        md << "| " << key << " | " << validation.at(key).dump() << " |\n";
    md << "\n";

    md << "## Chronotype clusters\n\n";
    md << "Clusters found: " << associations.at("k").dump() << " (BIC "
       << fmt(associations.at("bic").get<double>(), 1) << ")\n\n";
    md << "| Cluster | Size |\n|---|---|\n";
    {
        const auto sizes = associations.at("cluster_sizes");
        for (std::size_t i = 0; i < sizes.size(); ++i)
            md << "| " << i << " | " << sizes[i].dump() << " |\n";
    }
    md << "\n### Demographic associations (chi-square)\n\n";
    md << "| Demographic | Statistic | df | p |\n|---|---|---|---|\n";
    for (const auto& a : associations.at("associations"))
        md << "| " << a.at("demographic").get<std::string>() << " | "
           << fmt(a.at("statistic").get<double>()) << " | " << a.at("df").dump() << " | "
           << fmt(a.at("p").get<double>(), 4) << " |\n";
    md << "\n";

    md << "## Predictive models (five-fold cross-validation)\n\n";
    md << "| Model | R squared | RMSE |\n|---|---|---|\n";
    for (auto it = metrics.at("families").begin(); it != metrics.at("families").end(); ++it)
        md << "| " << it.key() << " | " << fmt(it.value().at("r2").get<double>(), 2) << " | "
           << fmt(it.value().at("rmse").get<double>(), 2) << " |\n";
    md << "\n";

    md << "## Feature importance\n\n";
    md << "Explained model: " << importance.at("model").get<std::string>() << "\n\n";
    md << "### Group regressions (medians/means of the focal login features)\n\n";
    md << "| Group | Predictor | Coefficient | p |\n|---|---|---|---|\n";
    for (const auto& reg : importance.at("regressions"))
        for (const auto& coef : reg.at("coefficients")) {
            const std::string name = coef.at("name").get<std::string>();
            if (name != "vol_median" && name != "reg_mean") continue;
            md << "| " << reg.at("scope").get<std::string>() << " | " << name << " | "
               << fmt(coef.at("coefficient").get<double>())
               << (coef.at("significant").get<bool>() ? "*" : "") << " | "
               << fmt(coef.at("p_value").get<double>(), 4) << " |\n";
        }
    md << "\n";

    md << "## Composite variables (sparse mCCA)\n\n";
    md << "Total pairwise correlation: " << fmt(weights.at("total_correlation").get<double>())
       << "\n\n";
    md << "| Composite | Feature | Weight |\n|---|---|---|\n";
    for (const auto& g : weights.at("groups"))
        for (auto it = g.at("weights").begin(); it != g.at("weights").end(); ++it) {
            const double v = it.value().get<double>();
            if (v == 0.0) continue;
            md << "| " << g.at("name").get<std::string>() << " | " << it.key() << " | "
               << fmt(v, 2) << " |\n";
        }
    md << "\n";

    md << "## Causal discovery\n\n";
    md << "### Mixed-variable search (PC variant)\n\n";
    graph_section(md, graphs.at("pc"));
    md << "### Continuous search with latent confounders (FCI-style PAG)\n\n";
    graph_section(md, graphs.at("fci"));

    md << "## Structural equation model\n\n";
    md << "Fit: chi-square " << fmt(sem.at("chi_square").get<double>()) << ", df "
       << sem.at("df").dump() << ", p " << fmt(sem.at("p_value").get<double>(), 4) << ", n "
       << sem.at("n").dump() << "\n\n";
    md << "| Path | Coefficient |\n|---|---|\n";
    for (const auto& e : sem.at("edges"))
        md << "| " << e.at("cause").get<std::string>() << " -> "
           << e.at("effect").get<std::string>() << " | "
           << fmt(e.at("coefficient").get<double>()) << " |\n";
    for (const auto& cv : sem.at("covariances"))
        md << "| " << cv.at("a").get<std::string>() << " <-> " << cv.at("b").get<std::string>()
           << " | " << fmt(cv.at("covariance").get<double>()) << " (covariance) |\n";
    md << "\n";

    io::write_text(io::artifact(out, "report.md"), md.str());
    return {Stage::Report, {"report.md"}};
}

}  // namespace lms::pipeline::detail
