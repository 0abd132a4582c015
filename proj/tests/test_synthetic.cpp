#include <gtest/gtest.h>

#include "reftraj/prediction.hpp"
#include "reftraj/reference.hpp"
#include "reftraj/synthetic.hpp"
#include "reftraj/trajectory.hpp"
#include "support.hpp"

using namespace reftraj;
using testing_support::TempDir;

namespace {

synth::SynthConfig small_config() {
    synth::SynthConfig cfg;
    cfg.points_per_class = 20;
    cfg.changing_per_transition = 5;
    cfg.n_sites = 50;
    return cfg;
}

}  // namespace

TEST(Synthetic, NoiselessStablePointEqualsCentroid) {
    auto cfg = small_config();
    cfg.noise_sigma = 0.0;
    const auto world = synth::generate_world(cfg);
    for (const auto& p : world.data.references) {
        const auto& row = *std::find_if(world.truth.rows.begin(), world.truth.rows.end(),
                                        [&](const auto& r) { return r.id == p.point_id; });
        if (row.kind != "stable") continue;
        for (const auto& [y, e] : p.embeddings) EXPECT_EQ(e, world.truth.centroids.at(*row.true_class));
    }
}

TEST(Synthetic, CentroidSeparation) {
    const auto cfg = small_config();
    const auto world = synth::generate_world(cfg);
    ASSERT_EQ(world.truth.centroids.size(), cfg.n_classes);
    for (const auto& [a, ea] : world.truth.centroids) {
        for (const auto& [b, eb] : world.truth.centroids) {
            if (a == b) continue;
            EXPECT_LE(synth::oracle_similarity(ea.raw(), eb.raw()), 1.0 - cfg.centroid_min_separation);
        }
    }
}

TEST(Synthetic, SeparationInfeasible) {
    auto cfg = small_config();
    cfg.dimension = 2;
    cfg.centroid_min_separation = 1.9;
    cfg.retry_budget = 200;
    try {
        synth::generate_world(cfg);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::SeparationInfeasible);
    }
}

TEST(Synthetic, FullRecoveryReachesForestCentroid) {
    auto cfg = small_config();
    cfg.noise_sigma = 0.0;
    cfg.site_start_years = {2017, 2017};
    cfg.recovery_rate_by_strategy[Strategy::FullAreaPlanting] = 1.0 / 8.0;
    cfg.years = {2017, 2025};
    cfg.lulc_years = {2015, 2025};
    const auto world = synth::generate_world(cfg);
    const auto& forest = world.truth.centroids.at(LulcKind::SecondaryForest);
    std::size_t checked = 0;
    for (const auto& row : world.truth.rows) {
        if (row.kind != "site" || *row.rate != 1.0 / 8.0) continue;
        const auto& site = *std::find_if(world.data.sites.begin(), world.data.sites.end(),
                                         [&](const auto& s) { return s.site_id == row.id; });
        const auto& e = site.embeddings.at(2025);
        EXPECT_NEAR(synth::oracle_similarity(e.raw(), forest.raw()), 1.0, 1e-15);
        for (std::size_t i = 0; i < e.size(); ++i) EXPECT_NEAR(e[i], forest[i], 1e-15);
        ++checked;
    }
    EXPECT_GT(checked, 0u);
}

TEST(Synthetic, SameSeedByteIdenticalFiles) {
    const auto cfg = small_config();
    TempDir a("synth_a"), b("synth_b");
    const auto fa = synth::write_world(synth::generate_world(cfg), a.path());
    const auto fb = synth::write_world(synth::generate_world(cfg), b.path());
    ASSERT_EQ(fa.size(), fb.size());
    for (std::size_t i = 0; i < fa.size(); ++i) {
        EXPECT_EQ(testing_support::read_file(fa[i]), testing_support::read_file(fb[i])) << fa[i];
    }
    auto other = cfg;
    other.seed = cfg.seed + 1;
    TempDir c("synth_c");
    synth::write_world(synth::generate_world(other), c.path());
    EXPECT_NE(testing_support::read_file(a / "embeddings.csv"), testing_support::read_file(c / "embeddings.csv"));
}

TEST(Synthetic, OracleAgreesWithLibrary) {
    Rng rng(1234);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const auto a = testing_support::gaussian(64, rng);
        const auto b = testing_support::gaussian(64, rng);
        worst = std::max(worst, std::abs(synth::oracle_similarity(a, b) - cosine_similarity(a, b)));
    }
    EXPECT_LT(worst, 1e-12);
    const auto e = testing_support::unit(8, 3, 2.0);
    EXPECT_EQ(synth::oracle_similarity(e, e), 1.0);
    EXPECT_EQ(synth::oracle_similarity(testing_support::unit(8, 0), testing_support::unit(8, 1)), 0.0);
}

TEST(Synthetic, NoiselessLabelsRecoveredByStabilityRule) {
    auto cfg = small_config();
    cfg.noise_sigma = 0.0;
    cfg.n_mislabeled = 3;
    const auto world = synth::generate_world(cfg);
    const auto pts = classify_points(world.data.references);
    std::map<std::string, const ReferencePoint*> by_id;
    for (const auto& p : pts) by_id[p.point_id] = &p;
    for (const auto& row : world.truth.rows) {
        if (row.kind == "site") continue;
        const auto& s = *by_id.at(row.id)->stability;
        if (row.kind == "stable") {
            EXPECT_EQ(s, Stability::stable(*row.true_class));
        } else if (row.kind == "mislabeled") {
            EXPECT_EQ(s, Stability::stable(*row.from));
        } else if (row.kind == "changing") {
            EXPECT_EQ(s, Stability::changing(*row.from, *row.to));
        } else {
            EXPECT_EQ(s, Stability::neither());
        }
    }
}

TEST(Synthetic, ExpectedSimilarityNonDecreasing) {
    auto cfg = small_config();
    cfg.noise_sigma = 0.0;
    cfg.n_sites = 200;
    const auto world = synth::generate_world(cfg);
    for (const auto& [id, by_year] : world.truth.expected_similarity) {
        double prev = -2.0;
        for (const auto& [y, s] : by_year) {
            EXPECT_GE(s, prev) << id;
            prev = s;
        }
    }
}

TEST(Synthetic, NoisyGroupMeanNonDecreasing) {
    auto cfg = small_config();
    cfg.n_sites = 200;
    cfg.site_start_years = {2017, 2017};
    const auto world = synth::generate_world(cfg);
    const auto refset = build_reference_set(classify_points(world.data.references));
    const auto trajs = build_trajectories(world.data.sites, refset, ReferenceKind::Global);
    const auto rows = aggregate_trajectories(trajs, world.data.sites, GroupBy::StartYear);
    for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_GE(rows[i].mean, rows[i - 1].mean - 0.01);
}

TEST(Synthetic, ConfigValidation) {
    auto cfg = small_config();
    cfg.recovery_rate_by_strategy[Strategy::Agroforestry] = cfg.recovery_rate_by_strategy[Strategy::NotIdentified];
    EXPECT_THROW(synth::generate_world(cfg), Error);
    cfg.independent_strategy_labels = true;
    EXPECT_NO_THROW(synth::generate_world(cfg));
    cfg.noise_sigma = -1;
    EXPECT_THROW(synth::generate_world(cfg), Error);
}

TEST(Synthetic, GroundTruthFileLayout) {
    const auto cfg = small_config();
    TempDir dir("gt");
    synth::write_world(synth::generate_world(cfg), dir.path());
    const auto text = testing_support::read_file(dir / "ground_truth.csv");
    EXPECT_EQ(text.substr(0, text.find('\n')), "id,kind,true_class,from,to,transition_year,rate");
}
