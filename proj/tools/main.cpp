// reftraj: command-line entry point. Every subcommand reads the ingest-format
// CSVs (or writes them, for `synth`), emits fixed-layout CSV tables into
// --output-dir and finishes with manifest.json.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "reftraj/reftraj.hpp"
#include "run_context.hpp"

namespace fs = std::filesystem;
using reftraj::csv::format_double;

namespace {

struct Options {
    std::string output_dir;
    std::optional<std::uint64_t> seed;
    std::size_t threads = 1;

    std::string data_dir;
    std::string embeddings, sites, spectral, covariates, references, lulc_codes;
    int first_year = 2017, last_year = 2024;
    int lulc_first_year = 2015, lulc_last_year = 2024;
    double min_area = 1.0;
    int start_year_min = 2017, start_year_max = 2024;
    std::string reference_policy = "fixed";
    int reference_year = 2024;
    int stable_years = 10;
    int stability_end_year = 2024;
    std::string change_from = "2017-2020";
    std::string change_to = "2021-2024";

    // references
    std::string action = "all";
    std::string metric = "cosine";
    std::size_t top_k = 10;
    std::vector<std::string> outlier_classes;

    // trajectories
    std::string reference = "both";
    std::vector<std::string> aggregate;

    // project
    std::optional<int> fit_year;

    // predict
    std::string task = "both";
    std::vector<std::string> models;
    std::vector<std::string> feature_sets;
    std::size_t folds = 5;
    int horizon = 3;
    int t0 = 0;
    std::size_t trees = 100;
    bool impute = false;

    // synth
    reftraj::synth::SynthConfig synth;

    // report
    std::vector<double> area_bins{1, 2, 5, 10, 20, 50, 100};
};

reftraj::YearWindow parse_range(const std::string& text, const char* what) {
    const auto dash = text.find('-');
    try {
        if (dash != std::string::npos) {
            return {std::stoi(text.substr(0, dash)), std::stoi(text.substr(dash + 1))};
        }
    } catch (const std::exception&) {
    }
    throw reftraj::Error(reftraj::ErrorCode::InvalidArgument,
                         std::string(what) + " must look like YYYY-YYYY, got '" + text + "'");
}

std::uint64_t require_seed(const Options& o, const char* command) {
    if (!o.seed) {
        throw reftraj::Error(reftraj::ErrorCode::InvalidArgument,
                             std::string(command) + " is stochastic and needs --seed");
    }
    return *o.seed;
}

reftraj::StabilityRule stability_rule(const Options& o) {
    return {o.stable_years, o.stability_end_year, parse_range(o.change_from, "--change-from"),
            parse_range(o.change_to, "--change-to")};
}

reftraj::ReferenceYearPolicy reference_policy(const Options& o) {
    const auto f = reftraj::detail::fold_label(o.reference_policy);
    if (f == "fixed" || f == "fixedyear") return reftraj::ReferenceYearPolicy::fixed(o.reference_year);
    if (f == "peryear") return reftraj::ReferenceYearPolicy::per_year();
    throw reftraj::Error(reftraj::ErrorCode::InvalidArgument, "unknown reference policy '" + o.reference_policy + "'");
}

nlohmann::json config_json(const Options& o, const std::string& command) {
    nlohmann::json j;
    j["command"] = command;
    j["seed"] = o.seed ? nlohmann::json(*o.seed) : nlohmann::json(nullptr);
    j["first_year"] = o.first_year;
    j["last_year"] = o.last_year;
    j["lulc_years"] = {o.lulc_first_year, o.lulc_last_year};
    j["min_area"] = o.min_area;
    j["start_years"] = {o.start_year_min, o.start_year_max};
    j["reference_policy"] = o.reference_policy;
    j["reference_year"] = o.reference_year;
    j["stable_years"] = o.stable_years;
    j["stability_end_year"] = o.stability_end_year;
    j["change_from"] = o.change_from;
    j["change_to"] = o.change_to;
    if (command == "references") {
        j["action"] = o.action;
        j["metric"] = o.metric;
        j["top_k"] = o.top_k;
        j["classes"] = o.outlier_classes;
    } else if (command == "trajectories") {
        j["reference"] = o.reference;
        j["aggregate"] = o.aggregate;
    } else if (command == "project") {
        j["fit_year"] = o.fit_year.value_or(o.reference_year);
    } else if (command == "predict") {
        j["task"] = o.task;
        j["models"] = o.models;
        j["feature_sets"] = o.feature_sets;
        j["folds"] = o.folds;
        j["horizon"] = o.horizon;
        j["t0"] = o.t0;
        j["trees"] = o.trees;
        j["impute"] = o.impute;
    } else if (command == "synth") {
        const auto& s = o.synth;
        j["dimension"] = s.dimension;
        j["n_classes"] = s.n_classes;
        j["points_per_class"] = s.points_per_class;
        j["changing_per_transition"] = s.changing_per_transition;
        j["n_unstable_points"] = s.n_unstable_points;
        j["n_sites"] = s.n_sites;
        j["noise_sigma"] = s.noise_sigma;
        j["initial_progress_max"] = s.initial_progress_max;
        j["independent_strategy_labels"] = s.independent_strategy_labels;
        j["n_mislabeled"] = s.n_mislabeled;
        j["site_start_years"] = {s.site_start_years.first, s.site_start_years.last};
    } else if (command == "report") {
        j["area_bins"] = o.area_bins;
    }
    return j;
}

// ---------------------------------------------------------------------------
// Shared input handling

struct Inputs {
    reftraj::Dataset data;
    reftraj::LoadReport load;
    reftraj::FilterReport funnel;
};

reftraj::DatasetPaths resolve_paths(const Options& o) {
    reftraj::DatasetPaths p;
    if (!o.data_dir.empty()) p = reftraj::DatasetPaths::in_directory(o.data_dir);
    auto override_with = [](fs::path& target, const std::string& value) {
        if (!value.empty()) target = value;
    };
    override_with(p.embeddings, o.embeddings);
    override_with(p.sites, o.sites);
    override_with(p.spectral, o.spectral);
    override_with(p.covariates, o.covariates);
    override_with(p.references, o.references);
    override_with(p.lulc_codes, o.lulc_codes);
    if (p.embeddings.empty() || p.sites.empty()) {
        throw reftraj::Error(reftraj::ErrorCode::InvalidArgument,
                             "inputs missing: give --data-dir or both --embeddings and --sites");
    }
    return p;
}

Inputs load_inputs(const Options& o, reftraj::cli::RunContext& ctx, bool need_references) {
    const auto paths = resolve_paths(o);
    if (need_references && paths.references.empty()) {
        throw reftraj::Error(reftraj::ErrorCode::InvalidArgument, "this command needs reference_points.csv");
    }
    for (const auto* p : {&paths.embeddings, &paths.sites, &paths.spectral, &paths.covariates, &paths.references,
                          &paths.lulc_codes}) {
        ctx.add_input(*p);
    }
    reftraj::LoadOptions opts;
    opts.window = {o.first_year, o.last_year};
    opts.lulc_years = {o.lulc_first_year, o.lulc_last_year};
    Inputs in;
    in.data = reftraj::load_dataset(paths, opts, &in.load);
    for (const auto& w : in.load.warnings) {
        std::cerr << "warning: " << w << '\n';
        ctx.note(w);
    }
    auto filtered = reftraj::filter_sites(std::move(in.data.sites), {o.min_area, {o.start_year_min, o.start_year_max}});
    in.data.sites = std::move(filtered.kept);
    in.funnel = filtered.report;
    in.data.references = reftraj::classify_points(std::move(in.data.references), stability_rule(o));
    return in;
}

std::string stability_label(const reftraj::ReferencePoint& p) {
    if (!p.stability) return "Unclassified";
    if (p.stability->is_stable()) return p.stability->from().name();
    if (p.stability->is_changing()) return p.stability->from().name() + "->" + p.stability->to().name();
    return "Neither";
}

// ---------------------------------------------------------------------------
// Subcommands

void run_validate(const Options& o, reftraj::cli::RunContext& ctx) {
    const auto in = load_inputs(o, ctx, false);
    reftraj::csv::Writer funnel({"stage", "count"});
    funnel.row({"input", std::to_string(in.funnel.input)});
    funnel.row({"dropped_area", std::to_string(in.funnel.dropped_area)});
    funnel.row({"dropped_start_year", std::to_string(in.funnel.dropped_start_year)});
    funnel.row({"kept", std::to_string(in.funnel.kept)});
    ctx.save("funnel.csv", funnel);

    reftraj::csv::Writer missing({"site_id"});
    for (const auto& id : in.load.sites_without_embeddings) missing.row({id});
    ctx.save("sites_without_embeddings.csv", missing);

    std::cout << "sites: " << in.funnel.input << " loaded, " << in.funnel.dropped_area << " dropped (area), "
              << in.funnel.dropped_start_year << " dropped (start year), " << in.funnel.kept << " kept; "
              << in.load.sites_without_embeddings.size() << " without embeddings; " << in.data.references.size()
              << " reference points\n";
}

void run_references(const Options& o, reftraj::cli::RunContext& ctx) {
    const auto in = load_inputs(o, ctx, true);
    const auto action = reftraj::detail::fold_label(o.action);
    if (action != "all" && action != "classify" && action != "build" && action != "outliers") {
        throw reftraj::Error(reftraj::ErrorCode::InvalidArgument, "unknown references action '" + o.action + "'");
    }
    const auto& points = in.data.references;

    if (action == "all" || action == "classify") {
        reftraj::csv::Writer out({"point_id", "stability", "class_from", "class_to"});
        for (const auto& p : points) {
            const auto& s = *p.stability;
            out.row({p.point_id, std::string(s.kind_name()), s.kind() == reftraj::Stability::Kind::Neither ? "" : s.from().name(),
                     s.kind() == reftraj::Stability::Kind::Neither ? "" : s.to().name()});
        }
        ctx.save("stability.csv", out);
    }
    if (action == "classify") return;

    const auto refset = reftraj::build_reference_set(points, reference_policy(o));
    if (action == "all" || action == "build") {
        std::vector<std::string> header{"kind", "name", "year", "n"};
        for (std::size_t i = 0; i < in.data.dimension; ++i) header.push_back(reftraj::embedding_column(i));
        reftraj::csv::Writer out(header);
        auto emit = [&](const std::string& kind, const std::string& name, int year, std::size_t n,
                        const reftraj::EmbeddingVector& v) {
            std::vector<std::string> row{kind, name, std::to_string(year), std::to_string(n)};
            for (double x : v.values()) row.push_back(format_double(x));
            out.row(row);
        };
        for (const auto& [year, v] : refset.global) emit("global", "SecondaryForest", year, refset.global_members.at(year).size(), v);
        for (const auto& [year, by_class] : refset.centroids) {
            for (const auto& [cls, v] : by_class) {
                std::size_t n = 0;
                for (const auto& p : points) {
                    if (p.stability->is_stable() && p.stability->from() == cls && p.embeddings.contains(year)) ++n;
                }
                emit("centroid", cls.name(), year, n, v);
            }
        }
        ctx.save("reference_set.csv", out);
    }
    if (action == "all" || action == "outliers") {
        const auto metric = reftraj::detail::fold_label(o.metric) == "euclidean" ? reftraj::DistanceMetric::Euclidean
                                                                                 : reftraj::DistanceMetric::Cosine;
        if (metric == reftraj::DistanceMetric::Cosine && reftraj::detail::fold_label(o.metric) != "cosine") {
            throw reftraj::Error(reftraj::ErrorCode::InvalidArgument, "unknown metric '" + o.metric + "'");
        }
        std::vector<reftraj::LulcClass> classes;
        if (o.outlier_classes.empty()) {
            for (const auto& [cls, v] : *refset.centroids_at(refset.anchor_year())) classes.push_back(cls);
        } else {
            for (const auto& name : o.outlier_classes) {
                const auto cls = reftraj::LulcClass::parse(name);
                if (!cls) throw reftraj::Error(reftraj::ErrorCode::UnknownClass, "unknown class '" + name + "'");
                classes.push_back(*cls);
            }
        }
        reftraj::csv::Writer out({"class", "rank", "point_id", "distance"});
        for (const auto& cls : classes) {
            const auto report = reftraj::detect_outliers(points, cls, refset, o.top_k, metric);
            for (std::size_t r = 0; r < report.ranked.size(); ++r) {
                out.row({cls.name(), std::to_string(r + 1), report.ranked[r].point_id,
                         format_double(report.ranked[r].distance)});
            }
        }
        ctx.save("outliers.csv", out);
    }
}

void run_trajectories(const Options& o, reftraj::cli::RunContext& ctx) {
    const auto in = load_inputs(o, ctx, true);
    const auto& sites = in.data.sites;
    const auto refset = reftraj::build_reference_set(in.data.references, reference_policy(o));

    std::vector<reftraj::ReferenceKind> kinds;
    const auto which = reftraj::detail::fold_label(o.reference);
    if (which == "global" || which == "both") kinds.push_back(reftraj::ReferenceKind::Global);
    if (which == "local" || which == "both") kinds.push_back(reftraj::ReferenceKind::Local);
    if (kinds.empty()) throw reftraj::Error(reftraj::ErrorCode::InvalidArgument, "unknown reference '" + o.reference + "'");

    std::vector<reftraj::GroupBy> groups;
    for (const auto& g : o.aggregate) {
        const auto parsed = reftraj::parse_group_by(g);
        if (!parsed) throw reftraj::Error(reftraj::ErrorCode::InvalidArgument, "unknown aggregate group '" + g + "'");
        groups.push_back(*parsed);
    }

    reftraj::csv::Writer similarity({"site_id", "reference", "year", "delta_t", "similarity"});
    for (auto kind : kinds) {
        const auto trajs = reftraj::build_trajectories(sites, refset, kind, o.threads);
        reftraj::csv::Writer improvement({"site_id", "improvement", "degenerate"});
        reftraj::csv::Writer local({"site_id", "point_id", "distance_km"});
        for (std::size_t i = 0; i < trajs.size(); ++i) {
            const auto& t = trajs[i];
            for (const auto& s : t.samples) {
                similarity.row({t.site_id, std::string(to_string(kind)), std::to_string(s.year), std::to_string(s.delta_t),
                                format_double(s.similarity)});
            }
            improvement.row({t.site_id, format_double(t.improvement.value), t.improvement.degenerate ? "1" : "0"});
            if (kind == reftraj::ReferenceKind::Local) {
                const auto lr = reftraj::find_local_reference(sites[i], refset);
                local.row({t.site_id, lr.point->point_id, format_double(lr.distance_km)});
            }
        }
        const std::string suffix(to_string(kind));
        ctx.save("improvement_" + suffix + ".csv", improvement);
        if (kind == reftraj::ReferenceKind::Local) ctx.save("local_reference.csv", local);
        for (auto g : groups) {
            reftraj::csv::Writer agg({"group", "delta_t", "mean", "sd", "n"});
            for (const auto& row : reftraj::aggregate_trajectories(trajs, sites, g)) {
                agg.row({row.group, std::to_string(row.delta_t), format_double(row.mean), format_double(row.sd),
                         std::to_string(row.n)});
            }
            const std::string name = "aggregate_" + std::string(to_string(g)) +
                                     (kind == reftraj::ReferenceKind::Local ? "_local" : "") + ".csv";
            ctx.save(name, agg);
        }
    }
    ctx.save("similarity.csv", similarity);

    const auto band = reftraj::compute_baselines(in.data.references, refset);
    reftraj::csv::Writer baselines({"band", "value"});
    baselines.row({"upper", format_double(band.upper)});
    baselines.row({"lower", format_double(band.lower)});
    ctx.save("baselines.csv", baselines);

    reftraj::csv::Writer spectral({"site_id", "delta_t", "ndvi", "evi"});
    for (const auto& site : sites) {
        for (const auto& s : reftraj::spectral_trajectory(site)) {
            spectral.row({site.site_id, std::to_string(s.delta_t), format_double(s.ndvi), format_double(s.evi)});
        }
    }
    ctx.save("spectral_trajectories.csv", spectral);

    reftraj::csv::Writer nearest({"site_id", "year", "nearest_class", "similarity", "change_magnitude"});
    reftraj::csv::Writer transitions({"site_id", "year", "from", "to"});
    for (const auto& site : sites) {
        const auto ct = reftraj::classify_trajectory(site, refset);
        for (const auto& step : ct.steps) {
            nearest.row({ct.id, std::to_string(step.year), step.nearest.name(), format_double(step.similarity),
                         step.change_magnitude ? format_double(*step.change_magnitude) : ""});
        }
        for (const auto& tr : ct.transitions) {
            transitions.row({ct.id, std::to_string(tr.year), tr.from.name(), tr.to.name()});
        }
    }
    ctx.save("nearest_class.csv", nearest);
    ctx.save("transitions.csv", transitions);
}

void run_project(const Options& o, reftraj::cli::RunContext& ctx) {
    const auto in = load_inputs(o, ctx, true);
    const int fit_year = o.fit_year.value_or(o.reference_year);
    std::vector<reftraj::EmbeddingVector> fit_data;
    std::vector<std::string> fit_labels;
    for (const auto& p : in.data.references) {
        if (!p.stability->is_stable()) continue;
        const auto it = p.embeddings.find(fit_year);
        if (it == p.embeddings.end()) continue;
        fit_data.push_back(it->second);
        fit_labels.push_back(p.stability->from().name());
    }
    const auto model = reftraj::fit_projection(fit_data);

    std::vector<std::string> header{"component", "explained_variance"};
    for (std::size_t i = 0; i < model.dimension(); ++i) header.push_back(reftraj::embedding_column(i));
    reftraj::csv::Writer model_out(header);
    for (std::size_t c = 0; c < 2; ++c) {
        std::vector<std::string> row{"pc" + std::to_string(c + 1), format_double(model.explained_variance[c])};
        for (double x : model.components[c]) row.push_back(format_double(x));
        model_out.row(row);
    }
    std::vector<std::string> mean_row{"mean", format_double(model.total_variance)};
    for (double x : model.mean.values()) mean_row.push_back(format_double(x));
    model_out.row(mean_row);
    ctx.save("projection_model.csv", model_out);

    reftraj::csv::Writer out({"id", "label", "year", "x", "y"});
    std::map<std::string, std::string> labels;
    for (const auto& p : in.data.references) labels[p.point_id] = stability_label(p);
    for (const auto& s : in.data.sites) labels[s.site_id] = std::string(reftraj::label(s.strategy));
    auto emit = [&](const std::vector<reftraj::PathRow>& rows) {
        for (const auto& r : rows) {
            out.row({r.id, labels.at(r.id), std::to_string(r.year), format_double(r.x), format_double(r.y)});
        }
    };
    emit(reftraj::trajectory_paths_2d(in.data.references, model));
    emit(reftraj::trajectory_paths_2d(in.data.sites, model));
    ctx.save("projection.csv", out);

    reftraj::csv::Writer sil({"metric", "value"});
    sil.row({"silhouette_cosine", format_double(reftraj::silhouette_score<std::string>(fit_data, fit_labels))});
    sil.row({"explained_variance_ratio_pc1", format_double(model.explained_variance[0] / model.total_variance)});
    sil.row({"explained_variance_ratio_pc2", format_double(model.explained_variance[1] / model.total_variance)});
    ctx.save("projection_summary.csv", sil);
}

void run_predict(const Options& o, reftraj::cli::RunContext& ctx) {
    const auto seed = require_seed(o, "predict");
    const auto in = load_inputs(o, ctx, true);
    const auto refset = reftraj::build_reference_set(in.data.references, reference_policy(o));
    const auto folds = reftraj::spatial_kfold(in.data.sites, o.folds, seed);

    reftraj::csv::Writer fold_out({"site_id", "fold"});
    for (const auto& [id, f] : folds.fold_of) fold_out.row({id, std::to_string(f)});
    ctx.save("folds.csv", fold_out);

    std::vector<reftraj::Task> tasks;
    const auto task = reftraj::detail::fold_label(o.task);
    if (task == "both") {
        tasks = {reftraj::Task::FutureSimilarity, reftraj::Task::Strategy};
    } else if (const auto t = reftraj::parse_task(o.task)) {
        tasks = {*t};
    } else {
        throw reftraj::Error(reftraj::ErrorCode::InvalidArgument, "unknown task '" + o.task + "'");
    }
    std::vector<reftraj::FeatureSet> sets;
    for (const auto& s : o.feature_sets) {
        const auto parsed = reftraj::parse_feature_set(s);
        if (!parsed) throw reftraj::Error(reftraj::ErrorCode::InvalidArgument, "unknown feature set '" + s + "'");
        sets.push_back(*parsed);
    }
    if (sets.empty()) sets.assign(reftraj::kAllFeatureSets.begin(), reftraj::kAllFeatureSets.end());

    reftraj::csv::Writer per_fold({"task", "model", "feature_set", "fold", "metric", "value"});
    reftraj::csv::Writer summary({"task", "model", "feature_set", "metric", "mean", "sd"});
    for (auto t : tasks) {
        reftraj::EvalConfig cfg;
        cfg.task = t;
        cfg.feature_sets = sets;
        cfg.horizon = o.horizon;
        cfg.t0 = o.t0;
        cfg.seed = seed;
        cfg.impute = o.impute;
        cfg.n_trees = o.trees;
        cfg.threads = o.threads;
        for (const auto& m : o.models) {
            const auto parsed = reftraj::parse_model(m);
            if (!parsed) throw reftraj::Error(reftraj::ErrorCode::InvalidArgument, "unknown model '" + m + "'");
            if (reftraj::model_supports(*parsed, t)) cfg.models.push_back(*parsed);
        }
        if (o.models.empty()) {
            cfg.models = {t == reftraj::Task::FutureSimilarity ? reftraj::ModelKind::Linear : reftraj::ModelKind::Logistic,
                          reftraj::ModelKind::RandomForest};
        }
        for (const auto& r : reftraj::evaluate(in.data.sites, refset, folds, cfg, in.data.dimension)) {
            const std::string ts(to_string(r.task)), ms(to_string(r.model)), fs_(to_string(r.feature_set));
            for (const auto& f : r.per_fold) {
                for (const auto& [metric, value] : f.metrics) {
                    per_fold.row({ts, ms, fs_, std::to_string(f.fold), metric, format_double(value)});
                }
            }
            for (const auto& s : r.aggregate) {
                summary.row({ts, ms, fs_, s.metric, format_double(s.mean), format_double(s.sd)});
            }
            for (int skipped : r.skipped_folds) {
                ctx.note(ts + "/" + ms + "/" + fs_ + ": fold " + std::to_string(skipped) + " skipped (FoldTooSmall)");
            }
            if (r.excluded_target + r.excluded_features > 0) {
                ctx.note(ts + "/" + ms + "/" + fs_ + ": excluded " + std::to_string(r.excluded_target) +
                         " sites without target, " + std::to_string(r.excluded_features) + " without features");
            }
        }
    }
    ctx.save("predict_folds.csv", per_fold);
    ctx.save("predict_summary.csv", summary);
}

void run_synth(const Options& o, reftraj::cli::RunContext& ctx) {
    auto config = o.synth;
    config.seed = require_seed(o, "synth");
    config.years = {o.first_year, o.last_year};
    config.lulc_years = {o.lulc_first_year, o.lulc_last_year};
    const auto world = reftraj::synth::generate_world(config);
    for (const auto& p : reftraj::synth::write_world(world, ctx.dir())) ctx.record(p);
    std::cout << "wrote " << world.data.sites.size() << " sites and " << world.data.references.size()
              << " reference points to " << ctx.dir().string() << '\n';
}

void run_report(const Options& o, reftraj::cli::RunContext& ctx) {
    const auto in = load_inputs(o, ctx, false);
    const auto& sites = in.data.sites;

    std::map<std::string, std::size_t> by_strategy;
    for (auto s : reftraj::kAllStrategies) by_strategy[std::string(reftraj::label(s))] = 0;
    std::map<int, std::size_t> by_year;
    std::map<std::string, std::size_t> by_lulc;
    for (const auto& s : sites) {
        ++by_strategy[std::string(reftraj::label(s.strategy))];
        ++by_year[s.start_year];
        ++by_lulc[s.start_lulc ? s.start_lulc->name() : "Unknown"];
    }
    reftraj::csv::Writer strategy({"strategy", "count"});
    for (const auto& [k, n] : by_strategy) strategy.row({k, std::to_string(n)});
    ctx.save("report_strategy.csv", strategy);
    reftraj::csv::Writer years({"start_year", "count"});
    for (const auto& [k, n] : by_year) years.row({std::to_string(k), std::to_string(n)});
    ctx.save("report_start_year.csv", years);
    reftraj::csv::Writer lulc({"start_lulc", "count"});
    for (const auto& [k, n] : by_lulc) lulc.row({k, std::to_string(n)});
    ctx.save("report_start_lulc.csv", lulc);

    auto bins = o.area_bins;
    std::sort(bins.begin(), bins.end());
    if (bins.empty()) throw reftraj::Error(reftraj::ErrorCode::InvalidArgument, "--area-bins must not be empty");
    reftraj::csv::Writer area({"bin_lo", "bin_hi", "count"});
    std::vector<std::size_t> counts(bins.size() + 1, 0);
    for (const auto& s : sites) {
        const auto pos = std::upper_bound(bins.begin(), bins.end(), s.area_ha) - bins.begin();
        ++counts[static_cast<std::size_t>(pos)];
    }
    for (std::size_t i = 0; i <= bins.size(); ++i) {
        area.row({i == 0 ? "-inf" : format_double(bins[i - 1]), i == bins.size() ? "inf" : format_double(bins[i]),
                  std::to_string(counts[i])});
    }
    ctx.save("report_area.csv", area);
}

void write_error(const fs::path& dir, const reftraj::Error& e) {
    nlohmann::json j{{"error", std::string(reftraj::to_string(e.code()))}, {"message", e.detail()}};
    if (e.line() > 0) j["line"] = e.line();
    std::cerr << j.dump() << '\n';
    if (!dir.empty() && fs::exists(dir)) {
        std::ofstream(dir / "error.json", std::ios::binary | std::ios::trunc) << j.dump(2) << '\n';
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"reftraj: restoration trajectories from annual embedding vectors"};
    app.require_subcommand(1, 1);
    app.fallthrough();
    app.set_config("--config", "", "Flat key=value config file; command-line flags take precedence");

    Options o;
    app.add_option("--output-dir", o.output_dir, "Directory for all outputs")->required();
    app.add_option("--seed", o.seed, "Seed for every stochastic step");
    app.add_option("--threads", o.threads, "Worker threads (results do not depend on it)")->capture_default_str();
    app.add_option("--data-dir", o.data_dir, "Directory holding the standard input files");
    app.add_option("--embeddings", o.embeddings, "embeddings.csv");
    app.add_option("--sites", o.sites, "sites.csv");
    app.add_option("--spectral", o.spectral, "spectral.csv");
    app.add_option("--covariates", o.covariates, "covariates.csv");
    app.add_option("--references", o.references, "reference_points.csv");
    app.add_option("--lulc-codes", o.lulc_codes, "code,name table");
    app.add_option("--first-year", o.first_year)->capture_default_str();
    app.add_option("--last-year", o.last_year)->capture_default_str();
    app.add_option("--lulc-first-year", o.lulc_first_year)->capture_default_str();
    app.add_option("--lulc-last-year", o.lulc_last_year)->capture_default_str();
    app.add_option("--min-area", o.min_area, "Minimum site area (ha, inclusive)")->capture_default_str();
    app.add_option("--start-year-min", o.start_year_min)->capture_default_str();
    app.add_option("--start-year-max", o.start_year_max)->capture_default_str();
    app.add_option("--reference-policy", o.reference_policy, "fixed | per-year")->capture_default_str();
    app.add_option("--reference-year", o.reference_year)->capture_default_str();
    app.add_option("--stable-years", o.stable_years)->capture_default_str();
    app.add_option("--stability-end-year", o.stability_end_year)->capture_default_str();
    app.add_option("--change-from", o.change_from, "Source window, YYYY-YYYY")->capture_default_str();
    app.add_option("--change-to", o.change_to, "Target window, YYYY-YYYY")->capture_default_str();

    auto* validate = app.add_subcommand("validate", "Load inputs and report the site filter funnel");
    auto* references = app.add_subcommand("references", "Classify reference points, build references, rank outliers");
    references->add_option("--action", o.action, "classify | build | outliers | all")->capture_default_str();
    references->add_option("--metric", o.metric, "cosine | euclidean")->capture_default_str();
    references->add_option("--top-k", o.top_k)->capture_default_str();
    references->add_option("--class", o.outlier_classes, "Classes to audit (default: all)");

    auto* trajectories = app.add_subcommand("trajectories", "Similarity trajectories, baselines and change detection");
    trajectories->add_option("--reference", o.reference, "global | local | both")->capture_default_str();
    trajectories->add_option("--aggregate", o.aggregate, "start_lulc | strategy | start_year (repeatable)");

    auto* project = app.add_subcommand("project", "2-D principal-axis projection of embeddings");
    project->add_option("--fit-year", o.fit_year, "Year of stable reference embeddings to fit on");

    auto* predict = app.add_subcommand("predict", "Spatially cross-validated prediction tasks");
    predict->add_option("--task", o.task, "future_similarity | strategy | both")->capture_default_str();
    predict->add_option("--models", o.models, "linear, logistic, random_forest");
    predict->add_option("--feature-sets", o.feature_sets, "covariates, spectral, covariates_spectral, embeddings, ...");
    predict->add_option("--folds", o.folds, "Number of spatial folds")->capture_default_str();
    predict->add_option("--horizon", o.horizon, "Years ahead for future similarity")->capture_default_str();
    predict->add_option("--t0", o.t0, "Feature year offset from restoration start")->capture_default_str();
    predict->add_option("--trees", o.trees)->capture_default_str();
    predict->add_flag("--impute", o.impute, "Mean-impute missing features from training folds");

    auto* synth = app.add_subcommand("synth", "Write a synthetic world with ground truth");
    auto& sc = o.synth;
    synth->add_option("--dim", sc.dimension)->capture_default_str();
    synth->add_option("--classes", sc.n_classes)->capture_default_str();
    synth->add_option("--points-per-class", sc.points_per_class)->capture_default_str();
    synth->add_option("--changing-per-transition", sc.changing_per_transition)->capture_default_str();
    synth->add_option("--unstable-points", sc.n_unstable_points)->capture_default_str();
    synth->add_option("--sites-count", sc.n_sites)->capture_default_str();
    synth->add_option("--noise", sc.noise_sigma)->capture_default_str();
    synth->add_option("--initial-progress-max", sc.initial_progress_max)->capture_default_str();
    synth->add_flag("--independent-strategy", sc.independent_strategy_labels);
    synth->add_option("--mislabeled", sc.n_mislabeled)->capture_default_str();
    synth->add_option("--site-start-first", sc.site_start_years.first)->capture_default_str();
    synth->add_option("--site-start-last", sc.site_start_years.last)->capture_default_str();

    auto* report = app.add_subcommand("report", "Metadata distributions of the filtered sites");
    report->add_option("--area-bins", o.area_bins, "Area bin edges in ha")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    const std::string command = app.get_subcommands().front()->get_name();
    std::optional<reftraj::cli::RunContext> ctx;
    try {
        ctx.emplace(o.output_dir);
        std::error_code ec;
        fs::remove(ctx->dir() / "error.json", ec);
        if (command == "validate") run_validate(o, *ctx);
        else if (command == "references") run_references(o, *ctx);
        else if (command == "trajectories") run_trajectories(o, *ctx);
        else if (command == "project") run_project(o, *ctx);
        else if (command == "predict") run_predict(o, *ctx);
        else if (command == "synth") run_synth(o, *ctx);
        else if (command == "report") run_report(o, *ctx);
        ctx->write_manifest(command, config_json(o, command));
    } catch (const reftraj::Error& e) {
        if (ctx) ctx->remove_outputs();
        write_error(o.output_dir, e);
        return 2;
    } catch (const std::exception& e) {
        if (ctx) ctx->remove_outputs();
        write_error(o.output_dir, reftraj::Error(reftraj::ErrorCode::IoError, e.what()));
        return 2;
    }
    (void)validate;
    (void)references;
    (void)trajectories;
    (void)project;
    (void)predict;
    (void)synth;
    (void)report;
    return 0;
}
