#include <gtest/gtest.h>

#include <cmath>

#include "reftraj/prediction.hpp"
#include "reftraj/synthetic.hpp"
#include "support.hpp"

using namespace reftraj;
using testing_support::stable_point;
using testing_support::unit;

namespace {

constexpr std::size_t kDim = 8;

CovariateSet random_covariates(Rng& rng) {
    const double tmin = rng.uniform(10, 15);
    return {rng.uniform(1000, 1800), tmin, tmin + rng.uniform(5, 10), rng.uniform(800, 1200), rng.uniform(200, 900),
            rng.uniform(0, 30), rng.uniform(0, 359), rng.uniform(0, 1), rng.uniform(0, 3)};
}

/// r̄ is axis 0. Each site's Δt=+3 embedding is built so that its cosine to
/// r̄ equals 0.2 + 0.1 * (x1 + 0.5 x2 - 0.3 x3), a linear function of three
/// coordinates of the Δt=0 embedding. Covariates are unrelated noise.
struct LinearWorld {
    std::vector<SiteRecord> sites;
    ReferenceSet refset;
};

LinearWorld linear_world(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    LinearWorld w;
    w.refset = build_reference_set({stable_point("sec", LulcKind::SecondaryForest, unit(kDim, 0))});
    for (std::size_t i = 0; i < n; ++i) {
        SiteRecord s;
        s.site_id = synth::pad_id("s", i, 4);
        s.lon = rng.uniform(-50, -45);
        s.lat = rng.uniform(-25, -20);
        s.area_ha = 3;
        s.start_year = 2018;
        s.strategy = kAllStrategies[rng.below(5)];
        std::vector<double> x0(kDim);
        for (auto& v : x0) v = std::clamp(rng.normal(), -2.5, 2.5);
        const double t = 0.2 + 0.1 * (x0[1] + 0.5 * x0[2] - 0.3 * x0[3]);
        std::vector<double> x3(kDim, 0.0);
        x3[0] = t;
        x3[4] = std::sqrt(1.0 - t * t);
        s.embeddings.emplace(2018, EmbeddingVector(x0));
        s.embeddings.emplace(2021, EmbeddingVector(x3));
        for (int y : {2018, 2021}) {
            s.covariates.emplace(y, random_covariates(rng));
            s.spectral.emplace(y, SpectralValues{rng.uniform(0.2, 0.8), rng.uniform(0.1, 0.6)});
        }
        w.sites.push_back(std::move(s));
    }
    return w;
}

double mean_metric(const std::vector<PredictionTaskResult>& results, ModelKind m, FeatureSet f, const std::string& name) {
    for (const auto& r : results) {
        if (r.model != m || r.feature_set != f) continue;
        for (const auto& s : r.aggregate)
            if (s.metric == name) return s.mean;
    }
    ADD_FAILURE() << "metric not found";
    return std::nan("");
}

}  // namespace

TEST(Features, Widths) {
    SiteRecord s;
    s.site_id = "s";
    s.embeddings.emplace(2020, EmbeddingVector(std::vector<double>(64, 0.1)));
    s.spectral.emplace(2020, SpectralValues{0.5, 0.2});
    s.covariates.emplace(2020, CovariateSet{});
    EXPECT_EQ(build_features(s, FeatureSet::Spectral, 2020, 64).size(), 2u);
    EXPECT_EQ(build_features(s, FeatureSet::All, 2020, 64).size(), 75u);
    EXPECT_EQ(feature_columns(FeatureSet::All, 64).size(), 75u);
    EXPECT_EQ(feature_columns(FeatureSet::All, 64).front(), "precip_mm");
    EXPECT_EQ(feature_columns(FeatureSet::All, 64)[9], "ndvi");
    EXPECT_EQ(feature_columns(FeatureSet::All, 64).back(), "A63");
    const auto all = build_features(s, FeatureSet::All, 2020, 64);
    EXPECT_EQ(all[9], 0.5);
    EXPECT_EQ(all[11], 0.1);
}

TEST(Features, MissingSpectral) {
    SiteRecord s;
    s.site_id = "s";
    s.embeddings.emplace(2020, EmbeddingVector(std::vector<double>(4, 0.1)));
    try {
        build_features(s, FeatureSet::Spectral, 2020, 4);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::MissingFeature);
    }
    const auto marked = build_features(s, FeatureSet::Spectral, 2020, 4, MissingPolicy::MarkNaN);
    EXPECT_TRUE(std::isnan(marked[0]));
}

TEST(Targets, FutureSimilarityAndStrategy) {
    const auto refset = build_reference_set({stable_point("sec", LulcKind::SecondaryForest, {1.0, 0.0})});
    SiteRecord a;
    a.site_id = "a";
    a.start_year = 2018;
    a.strategy = Strategy::NotIdentified;
    a.embeddings.emplace(2018, EmbeddingVector({0.3, std::sqrt(1 - 0.09)}));
    a.embeddings.emplace(2021, EmbeddingVector({0.6, std::sqrt(1 - 0.36)}));
    SiteRecord b = a;
    b.site_id = "b";
    b.embeddings.erase(2021);

    const auto t = make_targets({a, b}, refset, Task::FutureSimilarity);
    EXPECT_NEAR(t.values.at("a"), 0.6, 1e-15);
    EXPECT_FALSE(t.values.contains("b"));
    EXPECT_EQ(t.excluded, 1u);

    const auto s = make_targets({a, b}, refset, Task::Strategy);
    EXPECT_EQ(strategy_from_class(static_cast<int>(s.values.at("b"))), Strategy::NotIdentified);
    for (auto st : kAllStrategies) EXPECT_EQ(strategy_from_class(strategy_class(st)), st);
}

TEST(SpatialFolds, KOneAndDeterminism) {
    const auto w = linear_world(50, 1);
    const auto one = spatial_kfold(w.sites, 1, 3);
    for (const auto& [id, f] : one.fold_of) EXPECT_EQ(f, 0);
    EXPECT_EQ(spatial_kfold(w.sites, 5, 11), spatial_kfold(w.sites, 5, 11));
}

TEST(SpatialFolds, SeparatedBlobsBecomeFolds) {
    Rng rng(2);
    std::vector<SiteRecord> sites;
    const double centres[5][2] = {{-50, -20}, {-45, -20}, {-40, -20}, {-50, -25}, {-40, -25}};
    for (int b = 0; b < 5; ++b) {
        for (int i = 0; i < 20; ++i) {
            SiteRecord s;
            s.site_id = "b" + std::to_string(b) + "_" + std::to_string(i);
            s.lon = centres[b][0] + 0.05 * rng.normal();
            s.lat = centres[b][1] + 0.05 * rng.normal();
            sites.push_back(s);
        }
    }
    const auto folds = spatial_kfold(sites, 5, 4);
    std::map<int, std::set<int>> folds_of_blob;
    for (const auto& s : sites) folds_of_blob[s.site_id[1] - '0'].insert(folds.fold_of.at(s.site_id));
    std::set<int> used;
    for (const auto& [b, f] : folds_of_blob) {
        EXPECT_EQ(f.size(), 1u);
        used.insert(*f.begin());
    }
    EXPECT_EQ(used.size(), 5u);
}

TEST(Evaluate, EmbeddingsExplainLinearTarget) {
    const auto w = linear_world(300, 5);
    const auto folds = spatial_kfold(w.sites, 5, 5);
    EvalConfig cfg;
    cfg.models = {ModelKind::Linear};
    cfg.feature_sets = {FeatureSet::Embeddings, FeatureSet::Covariates};
    cfg.seed = 5;
    const auto results = evaluate(w.sites, w.refset, folds, cfg, kDim);
    EXPECT_GE(mean_metric(results, ModelKind::Linear, FeatureSet::Embeddings, "r2"), 0.99);
    EXPECT_LE(mean_metric(results, ModelKind::Linear, FeatureSet::Covariates, "r2"), 0.1);
}

TEST(Evaluate, PerfectPredictorScores) {
    const std::vector<double> y{0.1, 0.5, 0.9};
    const auto reg = score(Task::FutureSimilarity, y, y);
    EXPECT_EQ(reg[0].second, 1.0);
    EXPECT_EQ(reg[1].second, 0.0);
    const std::vector<double> c{0, 1, 2, 1};
    const auto cls = score(Task::Strategy, c, c);
    EXPECT_EQ(cls[0].second, 1.0);
    EXPECT_EQ(cls[1].second, 1.0);
}

TEST(Evaluate, RejectsTooFewFoldsAndMismatchedModels) {
    const auto w = linear_world(20, 6);
    EvalConfig cfg;
    cfg.models = {ModelKind::Linear};
    cfg.feature_sets = {FeatureSet::Embeddings};
    EXPECT_THROW(evaluate(w.sites, w.refset, spatial_kfold(w.sites, 1, 0), cfg, kDim), Error);
    cfg.task = Task::Strategy;
    EXPECT_THROW(evaluate(w.sites, w.refset, spatial_kfold(w.sites, 3, 0), cfg, kDim), Error);
}

TEST(Evaluate, EmptyTestFoldIsSkippedAndReported) {
    const auto w = linear_world(40, 7);
    auto folds = spatial_kfold(w.sites, 3, 7);
    for (auto& [id, f] : folds.fold_of)
        if (f == 2) f = 0;
    EvalConfig cfg;
    cfg.models = {ModelKind::Linear};
    cfg.feature_sets = {FeatureSet::Embeddings};
    const auto results = evaluate(w.sites, w.refset, folds, cfg, kDim);
    ASSERT_EQ(results.size(), 1u);
    EXPECT_EQ(results[0].skipped_folds, std::vector<int>{2});
    EXPECT_EQ(results[0].per_fold.size(), 2u);
}

TEST(Evaluate, SameSeedSameMetricsAnyThreadCount) {
    const auto w = linear_world(120, 8);
    const auto folds = spatial_kfold(w.sites, 4, 8);
    EvalConfig cfg;
    cfg.task = Task::Strategy;
    cfg.models = {ModelKind::Logistic, ModelKind::RandomForest};
    cfg.feature_sets = {FeatureSet::CovariatesSpectral};
    cfg.n_trees = 15;
    cfg.seed = 3;
    const auto a = evaluate(w.sites, w.refset, folds, cfg, kDim);
    cfg.threads = 3;
    const auto b = evaluate(w.sites, w.refset, folds, cfg, kDim);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        ASSERT_EQ(a[i].per_fold.size(), b[i].per_fold.size());
        for (std::size_t f = 0; f < a[i].per_fold.size(); ++f) EXPECT_EQ(a[i].per_fold[f].metrics, b[i].per_fold[f].metrics);
    }
}

TEST(Evaluate, NoLeakageFromTestFoldTargets) {
    auto w = linear_world(90, 9);
    // Knock out some spectral rows so imputation is exercised.
    for (std::size_t i = 0; i < w.sites.size(); i += 7) w.sites[i].spectral.erase(2018);
    const auto folds = spatial_kfold(w.sites, 3, 9);
    for (auto task : {Task::FutureSimilarity, Task::Strategy}) {
        EvalConfig cfg;
        cfg.task = task;
        cfg.impute = true;
        cfg.n_trees = 10;
        const auto rows = build_task_rows(w.sites, w.refset, folds, cfg, FeatureSet::All, kDim);
        for (int fold = 0; fold < 3; ++fold) {
            // Remove the held-out fold's rows entirely, as if their targets
            // were deleted, then refit.
            TaskRows stripped;
            stripped.x = Matrix(0, rows.x.cols());
            for (std::size_t i = 0; i < rows.ids.size(); ++i) {
                if (rows.fold[i] == fold) continue;
                stripped.ids.push_back(rows.ids[i]);
                stripped.x.append_row(rows.x.row(i));
                stripped.y.push_back(rows.y[i]);
                stripped.fold.push_back(rows.fold[i]);
            }
            const auto full = prepare_fold(rows, fold);
            const auto train_only = prepare_fold(stripped, fold);
            ASSERT_TRUE(train_only.y_test.empty());
            for (auto model : {ModelKind::Linear, ModelKind::Logistic, ModelKind::RandomForest}) {
                if (!model_supports(model, task)) continue;
                EXPECT_EQ(fit_fold(model, task, full, cfg, 42).fingerprint,
                          fit_fold(model, task, train_only, cfg, 42).fingerprint);
            }
        }
    }
}

TEST(Evaluate, MissingFeaturesExcludedWithoutImputation) {
    auto w = linear_world(30, 10);
    w.sites[0].spectral.clear();
    const auto folds = spatial_kfold(w.sites, 2, 1);
    EvalConfig cfg;
    const auto rows = build_task_rows(w.sites, w.refset, folds, cfg, FeatureSet::Spectral, kDim);
    EXPECT_EQ(rows.excluded_features, 1u);
    EXPECT_EQ(rows.ids.size(), 29u);
    cfg.impute = true;
    EXPECT_EQ(build_task_rows(w.sites, w.refset, folds, cfg, FeatureSet::Spectral, kDim).ids.size(), 30u);
}
