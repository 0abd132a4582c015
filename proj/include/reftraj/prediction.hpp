#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "reftraj/core.hpp"
#include "reftraj/hash.hpp"
#include "reftraj/ingest.hpp"
#include "reftraj/kmeans.hpp"
#include "reftraj/metrics.hpp"
#include "reftraj/models.hpp"
#include "reftraj/parallel.hpp"
#include "reftraj/reference.hpp"
#include "reftraj/similarity.hpp"

namespace reftraj {

// ---------------------------------------------------------------------------
// Feature sets

enum class FeatureSet { Covariates, Spectral, CovariatesSpectral, Embeddings, EmbeddingsCovariates, All };

inline constexpr std::array<FeatureSet, 6> kAllFeatureSets{FeatureSet::Covariates,   FeatureSet::Spectral,
                                                           FeatureSet::CovariatesSpectral, FeatureSet::Embeddings,
                                                           FeatureSet::EmbeddingsCovariates, FeatureSet::All};

inline std::string_view to_string(FeatureSet s) {
    switch (s) {
        case FeatureSet::Covariates: return "covariates";
        case FeatureSet::Spectral: return "spectral";
        case FeatureSet::CovariatesSpectral: return "covariates_spectral";
        case FeatureSet::Embeddings: return "embeddings";
        case FeatureSet::EmbeddingsCovariates: return "embeddings_covariates";
        case FeatureSet::All: return "all";
    }
    return "all";
}

inline std::optional<FeatureSet> parse_feature_set(std::string_view text) {
    for (auto s : kAllFeatureSets)
        if (detail::fold_label(text) == detail::fold_label(to_string(s))) return s;
    return std::nullopt;
}

inline bool uses_covariates(FeatureSet s) {
    return s == FeatureSet::Covariates || s == FeatureSet::CovariatesSpectral || s == FeatureSet::EmbeddingsCovariates ||
           s == FeatureSet::All;
}
inline bool uses_spectral(FeatureSet s) {
    return s == FeatureSet::Spectral || s == FeatureSet::CovariatesSpectral || s == FeatureSet::All;
}
inline bool uses_embeddings(FeatureSet s) {
    return s == FeatureSet::Embeddings || s == FeatureSet::EmbeddingsCovariates || s == FeatureSet::All;
}

/// Column names in layout order: covariates, spectral, embeddings.
inline std::vector<std::string> feature_columns(FeatureSet set, std::size_t dimension) {
    std::vector<std::string> cols;
    if (uses_covariates(set))
        for (auto c : kCovariateColumns) cols.emplace_back(c);
    if (uses_spectral(set)) {
        cols.emplace_back("ndvi");
        cols.emplace_back("evi");
    }
    if (uses_embeddings(set))
        for (std::size_t i = 0; i < dimension; ++i) cols.push_back(embedding_column(i));
    return cols;
}

enum class MissingPolicy { Error, MarkNaN };

/// Feature vector of `site` at `year`. Missing blocks raise MissingFeature,
/// or become NaN under MarkNaN (to be imputed with training statistics).
inline std::vector<double> build_features(const SiteRecord& site, FeatureSet set, int year, std::size_t dimension,
                                          MissingPolicy missing = MissingPolicy::Error) {
    std::vector<double> out;
    auto absent = [&](std::string_view what, std::size_t width) {
        if (missing == MissingPolicy::Error) {
            throw Error(ErrorCode::MissingFeature,
                        "site " + site.site_id + " has no " + std::string(what) + " for " + std::to_string(year));
        }
        out.insert(out.end(), width, std::numeric_limits<double>::quiet_NaN());
    };
    if (uses_covariates(set)) {
        const auto it = site.covariates.find(year);
        if (it == site.covariates.end()) {
            absent("covariates", CovariateSet::kColumns);
        } else {
            const auto v = it->second.as_array();
            out.insert(out.end(), v.begin(), v.end());
        }
    }
    if (uses_spectral(set)) {
        const auto it = site.spectral.find(year);
        if (it == site.spectral.end()) {
            absent("spectral indices", 2);
        } else {
            out.push_back(it->second.ndvi);
            out.push_back(it->second.evi);
        }
    }
    if (uses_embeddings(set)) {
        const auto it = site.embeddings.find(year);
        if (it == site.embeddings.end()) {
            absent("embedding", dimension);
        } else {
            if (it->second.size() != dimension) throw Error(ErrorCode::WrongDimension, "embedding dimension mismatch");
            out.insert(out.end(), it->second.raw().begin(), it->second.raw().end());
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Targets

enum class Task { FutureSimilarity, Strategy };

inline std::string_view to_string(Task t) { return t == Task::FutureSimilarity ? "future_similarity" : "strategy"; }

inline std::optional<Task> parse_task(std::string_view text) {
    const auto f = detail::fold_label(text);
    if (f == "futuresimilarity" || f == "future") return Task::FutureSimilarity;
    if (f == "strategy") return Task::Strategy;
    return std::nullopt;
}

/// Class index of a strategy: position in lexicographic identifier order, so
/// the smallest index wins vote ties lexicographically.
inline int strategy_class(Strategy s) {
    std::array<std::string_view, 5> ids{};
    for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = identifier(kAllStrategies[i]);
    std::sort(ids.begin(), ids.end());
    return static_cast<int>(std::find(ids.begin(), ids.end(), identifier(s)) - ids.begin());
}

inline Strategy strategy_from_class(int c) {
    for (auto s : kAllStrategies)
        if (strategy_class(s) == c) return s;
    throw Error(ErrorCode::InvalidArgument, "no strategy with class index " + std::to_string(c));
}

struct TargetSet {
    Task task = Task::FutureSimilarity;
    std::map<std::string, double> values;  ///< similarity, or strategy class index
    std::size_t excluded = 0;             ///< sites lacking the horizon year
};

/// FutureSimilarity: global similarity at Δt = t0 + horizon. Strategy: the
/// five-way label (NotIdentified included).
inline TargetSet make_targets(const std::vector<SiteRecord>& sites, const ReferenceSet& refset, Task task,
                              int horizon = 3, int t0 = 0) {
    TargetSet out;
    out.task = task;
    for (const auto& site : sites) {
        if (task == Task::Strategy) {
            out.values.emplace(site.site_id, static_cast<double>(strategy_class(site.strategy)));
            continue;
        }
        const int year = site.start_year + t0 + horizon;
        const auto it = site.embeddings.find(year);
        const auto* ref = refset.global_ref(year);
        if (it == site.embeddings.end() || !ref) {
            ++out.excluded;
            continue;
        }
        out.values.emplace(site.site_id, cosine_similarity(it->second, *ref));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Spatial folds

struct FoldAssignment {
    std::size_t k = 0;
    std::map<std::string, int> fold_of;
    std::vector<PointN<2>> centroids;  ///< (lon, lat)

    friend bool operator==(const FoldAssignment&, const FoldAssignment&) = default;
};

/// Folds are k-means clusters of (lon, lat), taken in site_id order so the
/// assignment does not depend on input order. Folds may be unbalanced.
inline FoldAssignment spatial_kfold(const std::vector<SiteRecord>& sites, std::size_t k, std::uint64_t seed) {
    std::vector<const SiteRecord*> sorted;
    for (const auto& s : sites) sorted.push_back(&s);
    std::sort(sorted.begin(), sorted.end(), [](const auto* a, const auto* b) { return a->site_id < b->site_id; });
    std::vector<PointN<2>> coords;
    for (const auto* s : sorted) coords.push_back({s->lon, s->lat});
    const auto km = kmeans<2>(coords, k, seed);
    FoldAssignment out;
    out.k = k;
    out.centroids = km.centroids;
    for (std::size_t i = 0; i < sorted.size(); ++i) out.fold_of.emplace(sorted[i]->site_id, km.assignment[i]);
    return out;
}

// ---------------------------------------------------------------------------
// Evaluation

enum class ModelKind { Linear, Logistic, RandomForest };

inline std::string_view to_string(ModelKind m) {
    switch (m) {
        case ModelKind::Linear: return "linear";
        case ModelKind::Logistic: return "logistic";
        case ModelKind::RandomForest: return "random_forest";
    }
    return "linear";
}

inline std::optional<ModelKind> parse_model(std::string_view text) {
    const auto f = detail::fold_label(text);
    if (f == "linear" || f == "ridge") return ModelKind::Linear;
    if (f == "logistic") return ModelKind::Logistic;
    if (f == "randomforest" || f == "rf") return ModelKind::RandomForest;
    return std::nullopt;
}

inline bool model_supports(ModelKind m, Task t) {
    if (m == ModelKind::Linear) return t == Task::FutureSimilarity;
    if (m == ModelKind::Logistic) return t == Task::Strategy;
    return true;
}

struct EvalConfig {
    Task task = Task::FutureSimilarity;
    std::vector<ModelKind> models;
    std::vector<FeatureSet> feature_sets;
    int horizon = 3;
    int t0 = 0;
    std::uint64_t seed = 0;
    bool impute = false;
    double ridge_lambda = 1e-6;
    LogisticOptions logistic;
    std::size_t n_trees = 100;
    std::size_t threads = 1;
};

/// Rows usable for one (task, feature set): sorted by site id.
struct TaskRows {
    std::vector<std::string> ids;
    Matrix x;  ///< may contain NaN under imputation
    std::vector<double> y;
    std::vector<int> fold;
    std::size_t excluded_target = 0;
    std::size_t excluded_features = 0;
};

inline TaskRows build_task_rows(const std::vector<SiteRecord>& sites, const ReferenceSet& refset,
                                const FoldAssignment& folds, const EvalConfig& cfg, FeatureSet set,
                                std::size_t dimension) {
    const auto targets = make_targets(sites, refset, cfg.task, cfg.horizon, cfg.t0);
    std::vector<const SiteRecord*> sorted;
    for (const auto& s : sites) sorted.push_back(&s);
    std::sort(sorted.begin(), sorted.end(), [](const auto* a, const auto* b) { return a->site_id < b->site_id; });

    TaskRows rows;
    rows.excluded_target = targets.excluded;
    const auto missing = cfg.impute ? MissingPolicy::MarkNaN : MissingPolicy::Error;
    const std::size_t width = feature_columns(set, dimension).size();
    rows.x = Matrix(0, width);
    for (const auto* site : sorted) {
        const auto target = targets.values.find(site->site_id);
        if (target == targets.values.end()) continue;
        const auto fold = folds.fold_of.find(site->site_id);
        if (fold == folds.fold_of.end()) {
            throw Error(ErrorCode::InvalidArgument, "site " + site->site_id + " has no fold");
        }
        std::vector<double> features;
        try {
            features = build_features(*site, set, site->start_year + cfg.t0, dimension, missing);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::MissingFeature) throw;
            ++rows.excluded_features;
            continue;
        }
        rows.ids.push_back(site->site_id);
        rows.x.append_row(features);
        rows.y.push_back(target->second);
        rows.fold.push_back(fold->second);
    }
    return rows;
}

/// Train/test split for one held-out fold. Imputation means come from the
/// training rows only.
struct PreparedFold {
    Matrix x_train;
    Matrix x_test;
    std::vector<double> y_train;
    std::vector<double> y_test;
    std::vector<double> impute_means;
};

inline PreparedFold prepare_fold(const TaskRows& rows, int fold) {
    PreparedFold out;
    out.x_train = Matrix(0, rows.x.cols());
    out.x_test = Matrix(0, rows.x.cols());
    for (std::size_t i = 0; i < rows.ids.size(); ++i) {
        if (rows.fold[i] == fold) {
            out.x_test.append_row(rows.x.row(i));
            out.y_test.push_back(rows.y[i]);
        } else {
            out.x_train.append_row(rows.x.row(i));
            out.y_train.push_back(rows.y[i]);
        }
    }
    out.impute_means.assign(rows.x.cols(), 0.0);
    for (std::size_t j = 0; j < rows.x.cols(); ++j) {
        double sum = 0.0;
        std::size_t n = 0;
        for (std::size_t i = 0; i < out.x_train.rows(); ++i) {
            if (!std::isnan(out.x_train(i, j))) {
                sum += out.x_train(i, j);
                ++n;
            }
        }
        out.impute_means[j] = n > 0 ? sum / static_cast<double>(n) : 0.0;
    }
    for (auto* m : {&out.x_train, &out.x_test}) {
        for (std::size_t i = 0; i < m->rows(); ++i)
            for (std::size_t j = 0; j < m->cols(); ++j)
                if (std::isnan((*m)(i, j))) (*m)(i, j) = out.impute_means[j];
    }
    return out;
}

struct FoldFit {
    std::vector<double> predictions;  ///< for x_test
    std::uint64_t fingerprint = 0;   ///< fitted parameters incl. imputation means
};

inline FoldFit fit_fold(ModelKind model, Task task, const PreparedFold& data, const EvalConfig& cfg,
                        std::uint64_t seed) {
    if (!model_supports(model, task)) {
        throw Error(ErrorCode::InvalidArgument,
                    std::string(to_string(model)) + " does not apply to task " + std::string(to_string(task)));
    }
    FoldFit out;
    Fnv1a h;
    h.numbers(data.impute_means);
    switch (model) {
        case ModelKind::Linear: {
            const auto m = train_linear(data.x_train, data.y_train, cfg.ridge_lambda);
            for (std::size_t i = 0; i < data.x_test.rows(); ++i) out.predictions.push_back(m.predict(data.x_test.row(i)));
            h.number(static_cast<std::int64_t>(m.fingerprint()));
            break;
        }
        case ModelKind::Logistic: {
            std::vector<int> labels(data.y_train.begin(), data.y_train.end());
            auto opts = cfg.logistic;
            opts.seed = seed;
            const auto m = train_logistic(data.x_train, labels, opts);
            for (std::size_t i = 0; i < data.x_test.rows(); ++i)
                out.predictions.push_back(static_cast<double>(m.predict(data.x_test.row(i))));
            h.number(static_cast<std::int64_t>(m.fingerprint()));
            break;
        }
        case ModelKind::RandomForest: {
            ForestOptions opts;
            opts.n_trees = cfg.n_trees;
            opts.mode = task == Task::Strategy ? ForestMode::Classification : ForestMode::Regression;
            opts.seed = seed;
            opts.threads = cfg.threads;
            const auto m = train_random_forest(data.x_train, data.y_train, opts);
            for (std::size_t i = 0; i < data.x_test.rows(); ++i) out.predictions.push_back(m.predict(data.x_test.row(i)));
            h.number(static_cast<std::int64_t>(m.fingerprint()));
            break;
        }
    }
    out.fingerprint = h.value();
    return out;
}

struct FoldMetrics {
    int fold = 0;
    std::size_t n_train = 0;
    std::size_t n_test = 0;
    std::vector<std::pair<std::string, double>> metrics;
};

struct MetricSummary {
    std::string metric;
    double mean = 0.0;
    double sd = 0.0;  ///< sample sd across folds, 0 for a single fold
};

struct PredictionTaskResult {
    Task task = Task::FutureSimilarity;
    ModelKind model = ModelKind::Linear;
    FeatureSet feature_set = FeatureSet::All;
    std::vector<FoldMetrics> per_fold;
    std::vector<MetricSummary> aggregate;
    std::vector<int> skipped_folds;  ///< folds with no usable test rows
    std::size_t n_rows = 0;
    std::size_t excluded_target = 0;
    std::size_t excluded_features = 0;

    double mean_of(std::string_view metric) const {
        for (const auto& m : aggregate)
            if (m.metric == metric) return m.mean;
        throw Error(ErrorCode::InvalidArgument, "no metric " + std::string(metric));
    }
};

inline std::vector<std::pair<std::string, double>> score(Task task, std::span<const double> truth,
                                                         std::span<const double> predicted) {
    if (task == Task::FutureSimilarity) {
        return {{"r2", r_squared(truth, predicted)}, {"mae", mean_absolute_error(truth, predicted)}};
    }
    std::vector<int> t(truth.begin(), truth.end());
    std::vector<int> p(predicted.begin(), predicted.end());
    return {{"accuracy", accuracy(t, p)}, {"macro_f1", macro_f1(t, p)}};
}

/// Cross-validated evaluation of every (model, feature set) pair: each fold in
/// turn is held out, the model is fitted on the rest and scored on it.
inline std::vector<PredictionTaskResult> evaluate(const std::vector<SiteRecord>& sites, const ReferenceSet& refset,
                                                  const FoldAssignment& folds, const EvalConfig& cfg,
                                                  std::size_t dimension) {
    if (folds.k < 2) throw Error(ErrorCode::InvalidArgument, "cross-validation needs at least 2 folds");
    for (auto m : cfg.models) {
        if (!model_supports(m, cfg.task)) {
            throw Error(ErrorCode::InvalidArgument,
                        std::string(to_string(m)) + " does not apply to task " + std::string(to_string(cfg.task)));
        }
    }
    std::vector<PredictionTaskResult> results;
    for (auto set : cfg.feature_sets) {
        const auto rows = build_task_rows(sites, refset, folds, cfg, set, dimension);
        for (auto model : cfg.models) {
            PredictionTaskResult result;
            result.task = cfg.task;
            result.model = model;
            result.feature_set = set;
            result.n_rows = rows.ids.size();
            result.excluded_target = rows.excluded_target;
            result.excluded_features = rows.excluded_features;
            // Folds run concurrently; each fit is single-threaded then, and
            // results land in fold order either way.
            auto fold_cfg = cfg;
            if (cfg.threads != 1 && folds.k > 1) fold_cfg.threads = 1;
            std::vector<std::optional<FoldMetrics>> per_fold(folds.k);
            parallel_for(folds.k, cfg.threads, [&](std::size_t f) {
                const int fold = static_cast<int>(f);
                const auto data = prepare_fold(rows, fold);
                if (data.y_test.empty() || data.y_train.empty()) return;
                const auto seed = mix_seed(cfg.seed, Fnv1a{}
                                                         .text(to_string(model))
                                                         .text(to_string(set))
                                                         .number(static_cast<std::int64_t>(fold))
                                                         .value());
                const auto fit = fit_fold(model, cfg.task, data, fold_cfg, seed);
                per_fold[f] = FoldMetrics{fold, data.y_train.size(), data.y_test.size(),
                                          score(cfg.task, data.y_test, fit.predictions)};
            });
            for (std::size_t f = 0; f < folds.k; ++f) {
                if (per_fold[f]) {
                    result.per_fold.push_back(std::move(*per_fold[f]));
                } else {
                    result.skipped_folds.push_back(static_cast<int>(f));
                }
            }
            if (!result.per_fold.empty()) {
                for (std::size_t m = 0; m < result.per_fold.front().metrics.size(); ++m) {
                    MetricSummary s{result.per_fold.front().metrics[m].first, 0.0, 0.0};
                    for (const auto& f : result.per_fold) s.mean += f.metrics[m].second;
                    const auto n = static_cast<double>(result.per_fold.size());
                    s.mean /= n;
                    if (result.per_fold.size() > 1) {
                        double ss = 0.0;
                        for (const auto& f : result.per_fold) ss += (f.metrics[m].second - s.mean) * (f.metrics[m].second - s.mean);
                        s.sd = std::sqrt(ss / (n - 1.0));
                    }
                    result.aggregate.push_back(s);
                }
            }
            results.push_back(std::move(result));
        }
    }
    return results;
}

}  // namespace reftraj
