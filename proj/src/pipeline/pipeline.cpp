#include "lms/pipeline/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>

#include "lms/cluster/cluster.hpp"
#include "lms/core/parallel.hpp"
#include "lms/core/rng.hpp"
#include "lms/core/time.hpp"
#include "lms/explain/explain.hpp"
#include "lms/mcca/mcca.hpp"
#include "stage_io.hpp"

namespace lms::pipeline {
namespace {

namespace fs = std::filesystem;
using io::ordered_json;

const std::map<Stage, std::vector<std::string>>& stage_outputs() {
    static const std::map<Stage, std::vector<std::string>> kOutputs = {
        {Stage::Generate,
         {"data/demographics.csv", "data/enrollments.csv", "data/login_events.csv",
          "data/grades.csv", "ground_truth.json"}},
        {Stage::Extract, {"features.csv", "manifest.json", "validation.json"}},
        {Stage::Cluster, {"clusters.csv", "associations.json"}},
        {Stage::Train, {"model_metrics.json"}},
        {Stage::Explain, {"importance.json", "importance.csv"}},
        {Stage::Cca, {"composites.csv", "mcca_weights.json"}},
        {Stage::Discover, {"graph.json", "graph.dot", "graph_pc.dot"}},
        {Stage::Sem, {"sem.json"}},
        {Stage::Report, {"report.md"}},
    };
    return kOutputs;
}

// ----------------------------------------------------------------- helpers --

std::vector<int> load_cluster_labels(const PipelineConfig& c,
                                     const std::vector<std::string>& expected_ids) {
    const auto path = io::require(c.out_dir, "clusters.csv", "cluster");
    const auto t = csv::read_file(path.string());
    const auto id = t.col("student_id"), cl = t.col("cluster");
    if (t.rows.size() != expected_ids.size())
        throw StageError("clusters.csv row count does not match features.csv");
    std::vector<int> labels(t.rows.size());
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        if (t.rows[i][id] != expected_ids[i])
            throw StageError("clusters.csv student order does not match features.csv");
        labels[i] = static_cast<int>(*csv::parse_int(t.rows[i][cl]));
    }
    return labels;
}

struct Composites {
    std::vector<std::string> group_names;
    Eigen::MatrixXd values;
};

Composites load_composites(const PipelineConfig& c, const std::vector<std::string>& expected_ids) {
    const auto path = io::require(c.out_dir, "composites.csv", "cca");
    const auto t = csv::read_file(path.string());
    Composites out;
    for (std::size_t j = 1; j < t.header.size(); ++j) out.group_names.push_back(t.header[j]);
    if (t.rows.size() != expected_ids.size())
        throw StageError("composites.csv row count does not match features.csv");
    out.values.resize(static_cast<Eigen::Index>(t.rows.size()),
                      static_cast<Eigen::Index>(out.group_names.size()));
    const auto id = t.col("student_id");
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        if (t.rows[i][id] != expected_ids[i])
            throw StageError("composites.csv student order does not match features.csv");
        for (std::size_t j = 0; j < out.group_names.size(); ++j)
            out.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                *csv::parse_double(t.rows[i][j + 1]);
    }
    return out;
}

// The mCCA feature blocks: the four multi-column login behavior families.
const std::vector<std::pair<std::string, std::string>>& mcca_groups() {
    static const std::vector<std::pair<std::string, std::string>> kGroups = {
        {"composite_volume", "login_volume"},
        {"composite_regularity", "login_regularity"},
        {"composite_hourly", "hourly_profile"},
        {"composite_weekend", "weekday_weekend"},
    };
    return kGroups;
}

// ------------------------------------------------------------------ stages --

StageResult stage_generate(const PipelineConfig& c) {
    auto [cohort, truth] = synth::generate_cohort(c.generator, c.seed);
    core::save_cohort(cohort, (fs::path(c.out_dir) / "data").string());

    ordered_json j;
    j["seed"] = c.seed;
    j["n_students"] = c.generator.n_students;
    j["latents"] = truth.latent_set;
    j["true_edges"] = ordered_json::array();
    for (const auto& e : truth.true_dag.edges())
        if (e.at_a == causal::Mark::Tail && e.at_b == causal::Mark::Arrow)
            j["true_edges"].push_back(
                {{"cause", truth.true_dag.name(e.a)}, {"effect", truth.true_dag.name(e.b)}});
    ordered_json coefs = ordered_json::array();
    for (const auto& e : c.generator.edge_coefficients)
        coefs.push_back({{"cause", e.cause}, {"effect", e.effect}, {"coef", e.coef}});
    j["edge_coefficients"] = coefs;
    j["cluster_labels"] = truth.cluster_labels;
    ordered_json planted = ordered_json::object();
    for (const auto& [name, values] : truth.planted) planted[name] = values;
    j["planted"] = planted;
    io::write_json(io::artifact(c.out_dir, "ground_truth.json"), j);
    return {Stage::Generate, stage_outputs().at(Stage::Generate)};
}

StageResult stage_extract(const PipelineConfig& c) {
    const std::string dir = c.data_dir();
    if (!fs::exists(fs::path(dir) / "demographics.csv")) {
        if (c.use_generator)
            throw StageError("missing data/demographics.csv: run generate first");
        throw DataError("input directory has no demographics.csv: " + dir);
    }
    core::LoadReport load_report;
    const core::Cohort cohort = core::load_cohort(dir, c.window, c.cutoff, &load_report);
    const auto validation = core::validate_cohort(cohort, c.min_course_enrollment);

    feat::FeatureOptions opts;
    opts.entropy_k = c.entropy_k;
    opts.min_course_enrollment = c.min_course_enrollment;
    const auto fm = feat::build_feature_matrix(cohort, opts);
    io::save_features(fm, c.out_dir);

    ordered_json v;
    v["n_students"] = validation.n_students;
    v["n_enrollments"] = validation.n_enrollments;
    v["n_events"] = validation.n_events;
    v["n_courses"] = validation.n_courses;
    v["zero_login_students"] = validation.zero_login_students;
    v["orphan_events"] = validation.orphan_events;
    v["tiny_courses"] = validation.tiny_courses;
    v["event_rows_read"] = load_report.event_rows_read;
    v["rejected_rows"] = ordered_json::array();
    for (const auto& r : load_report.rejected)
        v["rejected_rows"].push_back({{"file", r.file}, {"row", r.row}, {"reason", r.reason}});
    v["warnings"] = ordered_json::array();
    for (const auto& w : validation.warnings)
        v["warnings"].push_back({{"code", w.code}, {"message", w.message}});
    v["fatal"] = validation.fatal;
    io::write_json(io::artifact(c.out_dir, "validation.json"), v);
    if (!validation.ok()) throw DataError("cohort validation failed; see validation.json");
    return {Stage::Extract, stage_outputs().at(Stage::Extract)};
}

StageResult stage_cluster(const PipelineConfig& c) {
    io::require(c.out_dir, "features.csv", "extract");
    const auto fm = io::load_features(c.out_dir);
    const auto hour_cols = fm.family_cols("hourly_profile");
    const std::size_t missing_col = fm.col("profile_missing");

    std::vector<std::vector<double>> profiles(fm.student_ids.size(),
                                              std::vector<double>(hour_cols.size()));
    std::vector<char> valid(fm.student_ids.size(), 1);
    for (std::size_t i = 0; i < fm.student_ids.size(); ++i) {
        valid[i] = fm.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(missing_col)) == 0.0;
        for (std::size_t h = 0; h < hour_cols.size(); ++h)
            profiles[i][h] =
                fm.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(hour_cols[h]));
    }
    const auto model = cluster::xmeans(profiles, valid, c.clustering.kmin, c.clustering.kmax,
                                       c.clustering.band, rng::derive_seed(c.seed, "xmeans"));

    csv::Writer w({"student_id", "cluster"});
    for (std::size_t i = 0; i < fm.student_ids.size(); ++i)
        w.add_row({fm.student_ids[i], std::to_string(model.labels[i])});
    w.write_file(io::artifact(c.out_dir, "clusters.csv").string());

    // Demographic association tests against the cluster labels.
    ordered_json assoc = ordered_json::array();
    auto run_test = [&](const std::string& name, const std::vector<int>& codes) {
        const auto res = cluster::chi_square_association(codes, model.labels);
        assoc.push_back({{"demographic", name},
                         {"statistic", res.statistic},
                         {"df", res.df},
                         {"p", res.p}});
    };
    const std::size_t n = fm.student_ids.size();
    auto indicator_codes = [&](const std::string& col) {
        std::vector<int> out(n);
        const auto ci = static_cast<Eigen::Index>(fm.col(col));
        for (std::size_t i = 0; i < n; ++i)
            out[i] = static_cast<int>(fm.X(static_cast<Eigen::Index>(i), ci));
        return out;
    };
    run_test("gender", indicator_codes("gender_female"));
    {
        std::vector<int> eth(n, 0);
        const auto a = indicator_codes("ethnicity_asian"), m = indicator_codes("ethnicity_minority");
        for (std::size_t i = 0; i < n; ++i) eth[i] = a[i] ? 1 : (m[i] ? 2 : 0);
        run_test("ethnicity", eth);
    }
    run_test("enrollment_type", indicator_codes("enroll_parttime"));
    run_test("admit_type", indicator_codes("admit_transfer"));
    {
        std::vector<int> year(n, 0);
        const auto y2 = indicator_codes("year_2"), y3 = indicator_codes("year_3"),
                   y4 = indicator_codes("year_4");
        for (std::size_t i = 0; i < n; ++i) year[i] = y2[i] ? 1 : (y3[i] ? 2 : (y4[i] ? 3 : 0));
        run_test("student_year", year);
    }
    {
        // End-of-term GPA bands (<=2, (2,3], >3).
        std::vector<int> band(n, 0);
        for (std::size_t i = 0; i < n; ++i) {
            const double gpa = fm.y(static_cast<Eigen::Index>(i));
            band[i] = gpa <= 2.0 ? 0 : (gpa <= 3.0 ? 1 : 2);
        }
        run_test("gpa_band", band);
    }

    ordered_json j;
    j["k"] = model.k;
    j["bic"] = model.bic;
    std::vector<int> sizes(model.k, 0);
    for (int l : model.labels)
        if (l >= 0) ++sizes[static_cast<std::size_t>(l)];
    j["cluster_sizes"] = sizes;
    j["centroids"] = model.centroids;
    j["associations"] = assoc;
    io::write_json(io::artifact(c.out_dir, "associations.json"), j);
    return {Stage::Cluster, stage_outputs().at(Stage::Cluster)};
}

StageResult stage_train(const PipelineConfig& c) {
    io::require(c.out_dir, "features.csv", "extract");
    const auto fm = io::load_features(c.out_dir);

    ordered_json families = ordered_json::object();
    for (const auto family : {predict::Family::ElasticNet, predict::Family::DecisionTree,
                              predict::Family::RandomForest, predict::Family::Gbt}) {
        const auto metrics = predict::grid_search_cv(fm.X, fm.y, family, c.grids,
                                                     rng::derive_seed(c.seed, "train"), c.threads);
        ordered_json m;
        m["r2"] = metrics.r2;
        m["rmse"] = metrics.rmse;
        m["per_fold"] = ordered_json::array();
        for (const auto& f : metrics.per_fold)
            m["per_fold"].push_back({{"r2", f.r2}, {"rmse", f.rmse}});
        m["chosen"] = metrics.chosen_spec.params;
        families[predict::to_string(family)] = m;
    }
    ordered_json j;
    j["families"] = families;
    io::write_json(io::artifact(c.out_dir, "model_metrics.json"), j);
    return {Stage::Train, stage_outputs().at(Stage::Train)};
}

// Student groups used by the explanation methods (GPA bands, gender, admit
// type, ethnicity).
std::vector<std::pair<std::string, std::vector<bool>>> explanation_groups(
    const feat::FeatureMatrix& fm, bool include_all) {
    const std::size_t n = fm.student_ids.size();
    auto from_indicator = [&](const std::string& col, bool want) {
        std::vector<bool> mask(n);
        const auto ci = static_cast<Eigen::Index>(fm.col(col));
        for (std::size_t i = 0; i < n; ++i)
            mask[i] = (fm.X(static_cast<Eigen::Index>(i), ci) != 0.0) == want;
        return mask;
    };
    std::vector<std::pair<std::string, std::vector<bool>>> groups;
    if (include_all) groups.push_back({"All", std::vector<bool>(n, true)});
    std::vector<bool> low(n), mid(n), high(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double gpa = fm.y(static_cast<Eigen::Index>(i));
        low[i] = gpa <= 2.0;
        mid[i] = gpa > 2.0 && gpa <= 3.0;
        high[i] = gpa > 3.0;
    }
    groups.push_back({"GPA <= 2", low});
    groups.push_back({"2 < GPA <= 3", mid});
    groups.push_back({"GPA > 3", high});
    groups.push_back({"Male", from_indicator("gender_female", false)});
    groups.push_back({"Female", from_indicator("gender_female", true)});
    groups.push_back({"Regular", from_indicator("admit_transfer", false)});
    groups.push_back({"Transfer", from_indicator("admit_transfer", true)});
    {
        std::vector<bool> white(n), asian(n), minority(n);
        const auto a = static_cast<Eigen::Index>(fm.col("ethnicity_asian"));
        const auto m = static_cast<Eigen::Index>(fm.col("ethnicity_minority"));
        for (std::size_t i = 0; i < n; ++i) {
            const bool is_a = fm.X(static_cast<Eigen::Index>(i), a) != 0.0;
            const bool is_m = fm.X(static_cast<Eigen::Index>(i), m) != 0.0;
            white[i] = !is_a && !is_m;
            asian[i] = is_a;
            minority[i] = is_m;
        }
        groups.push_back({"White", white});
        groups.push_back({"Asian", asian});
        groups.push_back({"Minority", minority});
    }
    return groups;
}

StageResult stage_explain(const PipelineConfig& c) {
    io::require(c.out_dir, "features.csv", "extract");
    const auto metrics_json = io::read_json(io::require(c.out_dir, "model_metrics.json", "train"));
    const auto fm = io::load_features(c.out_dir);
    const std::size_t n = fm.student_ids.size();

    // Refit the best cross-validated family on the full data.
    std::string best_family;
    double best_r2 = -1e300;
    for (auto it = metrics_json.at("families").begin(); it != metrics_json.at("families").end();
         ++it) {
        const double r2 = it.value().at("r2").get<double>();
        if (r2 > best_r2) {
            best_r2 = r2;
            best_family = it.key();
        }
    }
    const auto& chosen = metrics_json.at("families").at(best_family).at("chosen");
    explain::PredictFn model;
    if (best_family == "elastic_net") {
        auto fitted = predict::fit_elastic_net(fm.X, fm.y, chosen.at("alpha").get<double>(),
                                               chosen.at("lambda").get<double>());
        model = [fitted](const Eigen::MatrixXd& X) { return fitted.predict(X); };
    } else if (best_family == "decision_tree") {
        auto fitted = predict::fit_tree(fm.X, fm.y, static_cast<int>(chosen.at("max_depth").get<double>()),
                                        static_cast<int>(chosen.at("min_leaf").get<double>()));
        model = [fitted](const Eigen::MatrixXd& X) { return fitted.predict(X); };
    } else if (best_family == "random_forest") {
        auto fitted = predict::fit_forest(fm.X, fm.y,
                                          static_cast<int>(chosen.at("n_trees").get<double>()),
                                          rng::derive_seed(c.seed, "explain-model"));
        model = [fitted](const Eigen::MatrixXd& X) { return fitted.predict(X); };
    } else {
        auto fitted = predict::fit_gbt(fm.X, fm.y, static_cast<int>(chosen.at("n_trees").get<double>()),
                                       chosen.at("learning_rate").get<double>(),
                                       static_cast<int>(chosen.at("max_depth").get<double>()));
        model = [fitted](const Eigen::MatrixXd& X) { return fitted.predict(X); };
    }

    std::vector<bool> indicator;
    std::vector<std::string> feature_names;
    for (const auto& col : fm.columns) {
        indicator.push_back(col.indicator);
        feature_names.push_back(col.name);
    }
    const auto perturb = explain::PerturbationModel::from_training(fm.X, indicator);
    explain::LimeOptions lime_opts{c.lime.n_samples, c.lime.perturb_scale};

    // Local importances once per student; groups aggregate the cache.
    const std::size_t p = feature_names.size();
    Eigen::MatrixXd locals(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
    parallel_for(n, c.threads, [&](std::size_t i) {
        const auto imp = explain::lime_local(
            model, fm.X.row(static_cast<Eigen::Index>(i)).transpose(), perturb, lime_opts,
            rng::derive_seed(rng::derive_seed(c.seed, "explain"), "lime-sample", i));
        for (std::size_t j = 0; j < p; ++j)
            locals(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = imp[j].value;
    });

    const auto groups = explanation_groups(fm, true);
    ordered_json reports = ordered_json::array();
    csv::Writer plot({"feature", "group", "method", "value"});
    for (const auto& [scope, mask] : groups) {
        double count = 0.0;
        Eigen::VectorXd mean_val = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p));
        Eigen::VectorXd mean_abs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p));
        for (std::size_t i = 0; i < n; ++i) {
            if (!mask[i]) continue;
            count += 1.0;
            mean_val += locals.row(static_cast<Eigen::Index>(i)).transpose();
            mean_abs += locals.row(static_cast<Eigen::Index>(i)).cwiseAbs().transpose();
        }
        if (count == 0.0) continue;
        mean_val /= count;
        mean_abs /= count;
        ordered_json rep;
        rep["scope"] = scope;
        rep["method"] = "LIME";
        rep["features"] = feature_names;
        rep["values"] = std::vector<double>(mean_val.data(), mean_val.data() + mean_val.size());
        rep["magnitudes"] =
            std::vector<double>(mean_abs.data(), mean_abs.data() + mean_abs.size());
        reports.push_back(rep);
        for (std::size_t j = 0; j < p; ++j)
            plot.add_row({feature_names[j], scope, "LIME", csv::format_double(mean_val(static_cast<Eigen::Index>(j)))});

        const auto corr =
            explain::correlation_importance(fm.X, fm.y, mask, feature_names, scope);
        ordered_json crep;
        crep["scope"] = scope;
        crep["method"] = "Correlation";
        crep["features"] = feature_names;
        std::vector<double> cv, cm;
        for (const auto& f : corr.per_feature) {
            cv.push_back(f.value);
            cm.push_back(f.magnitude);
        }
        crep["values"] = cv;
        crep["magnitudes"] = cm;
        reports.push_back(crep);
        for (std::size_t j = 0; j < p; ++j)
            plot.add_row({feature_names[j], scope, "Correlation", csv::format_double(cv[j])});
    }

    // Group regressions on the focal predictors plus controls.
    const std::vector<std::string> reg_cols = {"vol_median", "reg_mean", "start_gpa", "n_courses",
                                               "age"};
    Eigen::MatrixXd sub(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(reg_cols.size()));
    for (std::size_t j = 0; j < reg_cols.size(); ++j)
        sub.col(static_cast<Eigen::Index>(j)) = fm.X.col(static_cast<Eigen::Index>(fm.col(reg_cols[j])));
    ordered_json regressions = ordered_json::array();
    for (const auto& [scope, mask] : explanation_groups(fm, false)) {
        std::size_t size = 0;
        for (bool b : mask) size += b;
        if (size <= reg_cols.size() + 1) continue;
        const auto reg = explain::group_regression(sub, reg_cols, fm.y, mask, scope);
        ordered_json r;
        r["scope"] = scope;
        r["n"] = size;
        r["intercept"] = reg.intercept;
        r["dropped"] = reg.dropped;
        r["coefficients"] = ordered_json::array();
        for (const auto& coef : reg.coefficients) {
            r["coefficients"].push_back({{"name", coef.name},
                                         {"coefficient", coef.coefficient},
                                         {"std_error", coef.std_error},
                                         {"p_value", coef.p_value},
                                         {"significant", coef.significant}});
            plot.add_row({coef.name, scope, "Regression", csv::format_double(coef.coefficient)});
        }
        regressions.push_back(r);
    }

    ordered_json j;
    j["model"] = best_family;
    j["model_params"] = chosen;
    j["reports"] = reports;
    j["regressions"] = regressions;
    io::write_json(io::artifact(c.out_dir, "importance.json"), j);
    plot.write_file(io::artifact(c.out_dir, "importance.csv").string());
    return {Stage::Explain, stage_outputs().at(Stage::Explain)};
}

StageResult stage_cca(const PipelineConfig& c) {
    io::require(c.out_dir, "features.csv", "extract");
    const auto fm = io::load_features(c.out_dir);

    std::vector<mcca::FeatureGroup> groups;
    for (const auto& [composite_name, family] : mcca_groups()) {
        const auto cols = fm.family_cols(family);
        Eigen::MatrixXd block(fm.X.rows(), static_cast<Eigen::Index>(cols.size()));
        std::vector<std::string> names;
        for (std::size_t j = 0; j < cols.size(); ++j) {
            block.col(static_cast<Eigen::Index>(j)) =
                fm.X.col(static_cast<Eigen::Index>(cols[j]));
            names.push_back(fm.columns[cols[j]].name);
        }
        groups.push_back(mcca::FeatureGroup::standardized(composite_name, names, block));
    }

    std::vector<std::vector<double>> grid;
    for (double f : c.mcca_penalty_fractions) {
        std::vector<double> pens;
        for (const auto& g : groups)
            pens.push_back(1.0 + f * (std::sqrt(static_cast<double>(g.data.cols())) - 1.0));
        grid.push_back(pens);
    }
    const auto choice = mcca::mcca_grid_search(groups, grid, 25, rng::derive_seed(c.seed, "mcca"));
    const auto& res = choice.result;

    std::vector<std::string> header{"student_id"};
    for (const auto& name : res.group_names) header.push_back(name);
    csv::Writer w(header);
    for (std::size_t i = 0; i < fm.student_ids.size(); ++i) {
        std::vector<std::string> row{fm.student_ids[i]};
        for (std::size_t g = 0; g < res.group_names.size(); ++g)
            row.push_back(csv::format_double(
                res.composites(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(g))));
        w.add_row(row);
    }
    w.write_file(io::artifact(c.out_dir, "composites.csv").string());

    ordered_json j;
    j["penalties"] = res.penalties;
    j["total_correlation"] = res.total_correlation;
    j["sparsity_screen_met"] = choice.met_sparsity_screen;
    j["fallback"] = choice.fallback;
    j["groups"] = ordered_json::array();
    for (std::size_t g = 0; g < res.group_names.size(); ++g) {
        ordered_json group;
        group["name"] = res.group_names[g];
        group["penalty"] = res.penalties[g];
        group["support"] = res.support[g];
        ordered_json weights = ordered_json::object();
        for (std::size_t k = 0; k < res.group_columns[g].size(); ++k)
            weights[res.group_columns[g][k]] = res.weights[g](static_cast<Eigen::Index>(k));
        group["weights"] = weights;
        j["groups"].push_back(group);
    }
    std::vector<std::vector<double>> corr;
    for (Eigen::Index a = 0; a < res.pairwise_correlation.rows(); ++a) {
        std::vector<double> row;
        for (Eigen::Index b = 0; b < res.pairwise_correlation.cols(); ++b)
            row.push_back(res.pairwise_correlation(a, b));
        corr.push_back(row);
    }
    j["pairwise_correlation"] = corr;
    io::write_json(io::artifact(c.out_dir, "mcca_weights.json"), j);
    return {Stage::Cca, stage_outputs().at(Stage::Cca)};
}

// Shared by discover and sem: the causal datasets assembled from artifacts.
struct CausalData {
    causal::Dataset mixed;       // demographics + chronotype + behaviors + outcome
    causal::Dataset continuous;  // composites + start/end GPA + course count
};

CausalData build_causal_data(const PipelineConfig& c) {
    const auto fm = io::load_features(c.out_dir);
    const auto labels = load_cluster_labels(c, fm.student_ids);
    const auto comps = load_composites(c, fm.student_ids);
    const std::size_t n = fm.student_ids.size();

    auto col = [&](const std::string& name) {
        return fm.X.col(static_cast<Eigen::Index>(fm.col(name)));
    };

    CausalData out;
    // Continuous dataset: composites + enrolled courses + GPAs.
    {
        causal::Dataset& d = out.continuous;
        d.names = comps.group_names;
        d.names.push_back("n_courses");
        d.names.push_back("start_gpa");
        d.names.push_back("end_term_gpa");
        d.data.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d.names.size()));
        d.data.leftCols(comps.values.cols()) = comps.values;
        d.data.col(comps.values.cols()) = col("n_courses");
        d.data.col(comps.values.cols() + 1) = col("start_gpa");
        d.data.col(comps.values.cols() + 2) = fm.y;
        d.categorical.assign(d.names.size(), false);
    }
    // Mixed dataset: categorical demographics and chronotype cluster join the
    // continuous variables; rows without a chronotype label are dropped.
    {
        causal::Dataset& d = out.mixed;
        d.names = {"gender", "ethnicity", "student_year", "admit_type", "enrollment_type",
                   "chronotype", "age", "n_courses", "start_gpa"};
        for (const auto& g : comps.group_names) d.names.push_back(g);
        d.names.push_back("end_term_gpa");
        d.categorical.assign(d.names.size(), false);
        for (std::size_t v = 0; v < 6; ++v) d.categorical[v] = true;

        std::vector<std::size_t> keep;
        for (std::size_t i = 0; i < n; ++i)
            if (labels[i] >= 0) keep.push_back(i);
        d.data.resize(static_cast<Eigen::Index>(keep.size()),
                      static_cast<Eigen::Index>(d.names.size()));
        const auto female = col("gender_female"), asian = col("ethnicity_asian"),
                   minority = col("ethnicity_minority"), y2 = col("year_2"), y3 = col("year_3"),
                   y4 = col("year_4"), transfer = col("admit_transfer"),
                   parttime = col("enroll_parttime"), age = col("age"), nc = col("n_courses"),
                   sg = col("start_gpa");
        for (std::size_t r = 0; r < keep.size(); ++r) {
            const auto i = static_cast<Eigen::Index>(keep[r]);
            const auto row = static_cast<Eigen::Index>(r);
            d.data(row, 0) = female(i);
            d.data(row, 1) = asian(i) != 0.0 ? 1.0 : (minority(i) != 0.0 ? 2.0 : 0.0);
            d.data(row, 2) = y2(i) != 0.0 ? 1.0 : (y3(i) != 0.0 ? 2.0 : (y4(i) != 0.0 ? 3.0 : 0.0));
            d.data(row, 3) = transfer(i);
            d.data(row, 4) = parttime(i);
            d.data(row, 5) = static_cast<double>(labels[keep[r]]);
            d.data(row, 6) = age(i);
            d.data(row, 7) = nc(i);
            d.data(row, 8) = sg(i);
            for (Eigen::Index g = 0; g < comps.values.cols(); ++g)
                d.data(row, 9 + g) = comps.values(i, g);
            d.data(row, 9 + comps.values.cols()) = fm.y(i);
        }
    }
    return out;
}

StageResult stage_discover(const PipelineConfig& c) {
    io::require(c.out_dir, "features.csv", "extract");
    io::require(c.out_dir, "clusters.csv", "cluster");
    io::require(c.out_dir, "composites.csv", "cca");
    const CausalData data = build_causal_data(c);

    causal::SearchDiagnostics pc_diag, fci_diag;
    const auto pc_graph = causal::pc_stable(data.mixed, c.causal.knowledge, c.causal.alpha,
                                            c.causal.max_cond, &pc_diag);
    const auto fci_graph =
        causal::fci(data.continuous, c.causal.knowledge, c.causal.alpha, c.causal.max_cond,
                    &fci_diag);

    ordered_json j;
    j["pc"] = io::graph_to_json(pc_graph, pc_diag.removals, pc_diag.warnings);
    j["fci"] = io::graph_to_json(fci_graph, fci_diag.removals, fci_diag.warnings);
    io::write_json(io::artifact(c.out_dir, "graph.json"), j);
    io::write_text(io::artifact(c.out_dir, "graph.dot"), io::graph_to_dot(fci_graph, "fci_pag"));
    io::write_text(io::artifact(c.out_dir, "graph_pc.dot"),
                   io::graph_to_dot(pc_graph, "pc_variant"));
    return {Stage::Discover, stage_outputs().at(Stage::Discover)};
}

StageResult stage_sem(const PipelineConfig& c) {
    const auto gj = io::read_json(io::require(c.out_dir, "graph.json", "discover"));
    io::require(c.out_dir, "composites.csv", "cca");
    const CausalData data = build_causal_data(c);
    const causal::CausalGraph pag = io::graph_from_json(gj.at("fci"));

    // Resolve remaining circles: explicit overrides first, then tier order,
    // then variable order; knowledge-forbidden directions become bidirected.
    const causal::ResolvedKnowledge rk(c.causal.knowledge, pag.nodes());
    std::vector<causal::PagOverride> overrides = c.causal.pag_overrides;
    ordered_json auto_oriented = ordered_json::array();
    auto has_override = [&](const std::string& a, const std::string& b) {
        for (const auto& o : overrides)
            if ((o.a == a && o.b == b) || (o.a == b && o.b == a)) return true;
        return false;
    };
    for (const auto& e : pag.edges()) {
        if (e.at_a != causal::Mark::Circle && e.at_b != causal::Mark::Circle) continue;
        if (e.at_a == causal::Mark::Tail || e.at_b == causal::Mark::Tail) continue;  // self-resolving
        const std::string& na = pag.name(e.a);
        const std::string& nb = pag.name(e.b);
        if (has_override(na, nb)) continue;
        causal::PagOverride ov;
        ov.a = na;
        ov.b = nb;
        using O = causal::PagOverride::Orient;
        if (e.at_a == causal::Mark::Arrow) {
            // b o-> a: only b -> a or a <-> b remain.
            ov.orient = rk.is_forbidden(e.b, e.a) ? O::Bidirected : O::BtoA;
        } else if (e.at_b == causal::Mark::Arrow) {
            ov.orient = rk.is_forbidden(e.a, e.b) ? O::Bidirected : O::AtoB;
        } else {
            // Circle-circle: earlier tier causes later; same or unknown tiers
            // fall back to variable order (acyclic by construction).
            const int ta = rk.tier_of(e.a), tb = rk.tier_of(e.b);
            bool a_first = e.a < e.b;
            if (ta >= 0 && tb >= 0 && ta != tb) a_first = ta < tb;
            ov.orient = a_first ? O::AtoB : O::BtoA;
            const std::size_t cause = a_first ? e.a : e.b;
            const std::size_t effect = a_first ? e.b : e.a;
            if (rk.is_forbidden(cause, effect))
                ov.orient = rk.is_forbidden(effect, cause) ? O::Bidirected
                            : (a_first ? O::BtoA : O::AtoB);
        }
        overrides.push_back(ov);
        auto_oriented.push_back({na, nb});
    }

    const auto dag = causal::pag_to_dag(pag, overrides);
    const auto fit = causal::fit_sem(dag, data.continuous);

    ordered_json j;
    j["nodes"] = dag.nodes();
    j["edges"] = ordered_json::array();
    for (const auto& e : fit.edges)
        j["edges"].push_back(
            {{"cause", e.cause}, {"effect", e.effect}, {"coefficient", e.coefficient}});
    j["covariances"] = ordered_json::array();
    for (const auto& cv : fit.covariances)
        j["covariances"].push_back({{"a", cv.a}, {"b", cv.b}, {"covariance", cv.covariance}});
    ordered_json resid = ordered_json::object();
    for (const auto& [name, var] : fit.residual_variance) resid[name] = var;
    j["residual_variances"] = resid;
    j["chi_square"] = fit.chi_square;
    j["df"] = fit.df;
    j["p_value"] = fit.p_value;
    j["n"] = fit.n;
    j["auto_oriented"] = auto_oriented;
    io::write_json(io::artifact(c.out_dir, "sem.json"), j);
    return {Stage::Sem, stage_outputs().at(Stage::Sem)};
}

}  // namespace

const char* to_string(Stage s) {
    switch (s) {
        case Stage::Generate: return "generate";
        case Stage::Extract: return "extract";
        case Stage::Cluster: return "cluster";
        case Stage::Train: return "train";
        case Stage::Explain: return "explain";
        case Stage::Cca: return "cca";
        case Stage::Discover: return "discover";
        case Stage::Sem: return "sem";
        default: return "report";
    }
}

Stage stage_from_name(const std::string& name) {
    for (const Stage s : {Stage::Generate, Stage::Extract, Stage::Cluster, Stage::Train,
                          Stage::Explain, Stage::Cca, Stage::Discover, Stage::Sem, Stage::Report})
        if (name == to_string(s)) return s;
    throw ConfigError("unknown stage '" + name + "'");
}

std::vector<Stage> planned_stages(const PipelineConfig& config) {
    std::vector<Stage> stages;
    if (config.use_generator) stages.push_back(Stage::Generate);
    for (const Stage s : {Stage::Extract, Stage::Cluster, Stage::Train, Stage::Explain,
                          Stage::Cca, Stage::Discover, Stage::Sem, Stage::Report})
        stages.push_back(s);
    return stages;
}

StageResult run_stage(const PipelineConfig& config, Stage stage) {
    fs::create_directories(config.out_dir);
    switch (stage) {
        case Stage::Generate:
            if (!config.use_generator)
                throw ConfigError("generate stage needs a 'generator' config block");
            return stage_generate(config);
        case Stage::Extract: return stage_extract(config);
        case Stage::Cluster: return stage_cluster(config);
        case Stage::Train: return stage_train(config);
        case Stage::Explain: return stage_explain(config);
        case Stage::Cca: return stage_cca(config);
        case Stage::Discover: return stage_discover(config);
        case Stage::Sem: return stage_sem(config);
        default: return detail::stage_report(config);
    }
}

std::string file_hash(const std::string& path) {
    const std::string content = io::read_text(path);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : content) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::vector<StageResult> run_pipeline(const PipelineConfig& config) {
    fs::create_directories(config.out_dir);
    const auto manifest_path = io::artifact(config.out_dir, "artifacts.json");
    ordered_json manifest = fs::exists(manifest_path)
                                ? io::read_json(manifest_path)
                                : ordered_json{{"files", ordered_json::object()}};

    auto outputs_current = [&](Stage stage) {
        for (const auto& rel : stage_outputs().at(stage)) {
            const auto path = io::artifact(config.out_dir, rel);
            if (!fs::exists(path)) return false;
            if (!manifest.at("files").contains(rel)) return false;
            if (manifest.at("files").at(rel).at("hash").get<std::string>() !=
                file_hash(path.string()))
                return false;
        }
        return true;
    };

    std::vector<StageResult> results;
    for (const Stage stage : planned_stages(config)) {
        if (outputs_current(stage)) {
            results.push_back({stage, stage_outputs().at(stage), true});
            continue;
        }
        StageResult res = run_stage(config, stage);
        for (const auto& rel : res.files) {
            manifest["files"][rel] = {
                {"hash", file_hash(io::artifact(config.out_dir, rel).string())},
                {"stage", to_string(stage)}};
        }
        io::write_json(manifest_path, manifest);
        results.push_back(std::move(res));
    }
    return results;
}

}  // namespace lms::pipeline
