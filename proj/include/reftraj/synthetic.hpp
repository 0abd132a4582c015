#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "reftraj/core.hpp"
#include "reftraj/csv.hpp"
#include "reftraj/ingest.hpp"
#include "reftraj/rng.hpp"

namespace reftraj::synth {

/// Class order used by the generator; `n_classes` takes a prefix, so the
/// first three (the reference and both baseline classes) are always present.
inline constexpr std::array<LulcKind, 10> kClassOrder{
    LulcKind::SecondaryForest, LulcKind::PrimaryForest,   LulcKind::Pasture,   LulcKind::ForestFormation,
    LulcKind::Urban,           LulcKind::ForestPlantation, LulcKind::SugarCane, LulcKind::Coffee,
    LulcKind::Grassland,       LulcKind::Wetland};

inline bool forest_family(LulcKind k) {
    return k == LulcKind::PrimaryForest || k == LulcKind::SecondaryForest || k == LulcKind::ForestFormation ||
           k == LulcKind::ForestPlantation;
}

struct SynthConfig {
    std::uint64_t seed = 7;
    std::size_t dimension = kDefaultDimension;
    std::size_t n_classes = 10;
    std::size_t points_per_class = 200;
    std::size_t changing_per_transition = 40;
    std::vector<std::pair<LulcKind, LulcKind>> transitions{
        {LulcKind::ForestFormation, LulcKind::Urban},     {LulcKind::ForestFormation, LulcKind::SugarCane},
        {LulcKind::ForestFormation, LulcKind::Pasture},   {LulcKind::Pasture, LulcKind::ForestFormation},
        {LulcKind::Coffee, LulcKind::ForestFormation}};
    std::size_t n_unstable_points = 20;
    std::size_t n_sites = 400;
    double noise_sigma = 0.05;
    YearWindow years{2017, 2024};
    YearWindow lulc_years{2015, 2024};
    YearWindow change_from{2017, 2020};
    YearWindow change_to{2021, 2024};
    YearWindow site_start_years{2017, 2021};
    std::map<Strategy, double> recovery_rate_by_strategy{
        {Strategy::NaturalRegenMgmt, 0.15}, {Strategy::NaturalRegenNoMgmt, 0.10}, {Strategy::FullAreaPlanting, 0.20},
        {Strategy::Agroforestry, 0.08},     {Strategy::NotIdentified, 0.12}};
    double centroid_min_separation = 0.3;
    /// Shared-direction weight for forest-family centroids; their pairwise
    /// cosine is close to this value.
    double forest_affinity = 0.6;
    /// Sites start a uniform fraction in [0, max] of the way to forest.
    double initial_progress_max = 0.0;
    /// Strategy labels drawn independently of the recovery rate.
    bool independent_strategy_labels = false;
    std::size_t n_mislabeled = 0;
    LulcKind mislabel_class = LulcKind::ForestFormation;
    LulcKind mislabel_source = LulcKind::Urban;
    std::size_t retry_budget = 100000;
    double lon_min = -53.1, lon_max = -44.2, lat_min = -25.3, lat_max = -19.8;
};

struct TruthRow {
    std::string id;
    std::string kind;  ///< stable | changing | unstable | mislabeled | site
    std::optional<LulcClass> true_class;
    std::optional<LulcClass> from;
    std::optional<LulcClass> to;
    std::optional<int> transition_year;
    std::optional<double> rate;
};

struct GroundTruth {
    std::map<LulcClass, EmbeddingVector> centroids;
    std::vector<TruthRow> rows;  ///< sorted by id
    /// Noise-free similarity of each site to the SecondaryForest centroid.
    std::map<std::string, std::map<int, double>> expected_similarity;
};

struct World {
    Dataset data;
    GroundTruth truth;
    LulcCodeTable codes = LulcCodeTable::mapbiomas_default();
    YearWindow lulc_years;
};

/// Cosine similarity written independently of the library path: plain loops, no shared
/// helpers, used as the cross-check oracle in tests.
inline double oracle_similarity(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw Error(ErrorCode::WrongDimension, "oracle: dimension mismatch");
    long double num = 0.0L;
    long double na = 0.0L;
    long double nb = 0.0L;
    for (std::size_t i = 0; i < a.size(); ++i) num += static_cast<long double>(a[i]) * b[i];
    for (std::size_t i = 0; i < a.size(); ++i) na += static_cast<long double>(a[i]) * a[i];
    for (std::size_t i = 0; i < b.size(); ++i) nb += static_cast<long double>(b[i]) * b[i];
    if (na == 0.0L || nb == 0.0L) throw Error(ErrorCode::ZeroVector, "oracle: zero vector");
    return static_cast<double>(num / (std::sqrt(na) * std::sqrt(nb)));
}

inline std::vector<double> normalized(std::vector<double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    s = std::sqrt(s);
    if (s == 0.0) throw Error(ErrorCode::ZeroVector, "cannot normalize a zero vector");
    for (double& x : v) x /= s;
    return v;
}

inline std::vector<double> random_unit(std::size_t dim, Rng& rng) {
    std::vector<double> v(dim);
    for (auto& x : v) x = rng.normal();
    return normalized(std::move(v));
}

/// normalize((1 - f) * a + f * b)
inline std::vector<double> interpolate(const EmbeddingVector& a, const EmbeddingVector& b, double f) {
    std::vector<double> v(a.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = (1.0 - f) * a[i] + f * b[i];
    return normalized(std::move(v));
}

/// normalize(v + N(0, sigma^2 I)); exact copy of v when sigma = 0.
inline EmbeddingVector with_noise(std::vector<double> v, double sigma, Rng& rng) {
    if (sigma == 0.0) return EmbeddingVector(std::move(v));
    for (auto& x : v) x += sigma * rng.normal();
    return EmbeddingVector(normalized(std::move(v)));
}

/// Noise-free site embedding at recovery fraction f (capped to [0, 1]).
inline std::vector<double> recovering_embedding(const GroundTruth& truth, double fraction) {
    const auto& pasture = truth.centroids.at(LulcKind::Pasture);
    const auto& forest = truth.centroids.at(LulcKind::SecondaryForest);
    return interpolate(pasture, forest, std::clamp(fraction, 0.0, 1.0));
}

inline void validate(const SynthConfig& c) {
    auto fail = [](const std::string& m) { throw Error(ErrorCode::InvalidArgument, "synthetic config: " + m); };
    if (c.dimension < 2) fail("dimension must be >= 2");
    if (c.n_classes < 3 || c.n_classes > kClassOrder.size()) fail("n_classes must lie in [3, 10]");
    if (c.noise_sigma < 0 || !std::isfinite(c.noise_sigma)) fail("noise_sigma must be >= 0");
    if (!(c.centroid_min_separation > 0)) fail("centroid_min_separation must be > 0");
    if (c.years.first > c.years.last) fail("empty year window");
    if (c.lulc_years.last < c.years.last) fail("LULC years must extend through the embedding window");
    if (c.forest_affinity < 0 || c.forest_affinity >= 1) fail("forest_affinity must lie in [0, 1)");
    if (c.initial_progress_max < 0 || c.initial_progress_max > 1) fail("initial_progress_max must lie in [0, 1]");
    for (auto s : kAllStrategies) {
        const auto it = c.recovery_rate_by_strategy.find(s);
        if (it == c.recovery_rate_by_strategy.end()) fail("missing recovery rate for " + std::string(identifier(s)));
        if (it->second < 0 || it->second > 1) fail("recovery rates must lie in [0, 1]");
    }
    if (!c.independent_strategy_labels) {
        std::vector<double> rates;
        for (const auto& [s, r] : c.recovery_rate_by_strategy) rates.push_back(r);
        std::sort(rates.begin(), rates.end());
        if (std::adjacent_find(rates.begin(), rates.end()) != rates.end()) {
            fail("recovery rates must be distinct across strategies");
        }
    }
}

inline std::string pad_id(std::string_view prefix, std::size_t i, int width) {
    std::string digits = std::to_string(i);
    if (static_cast<int>(digits.size()) < width) digits.insert(0, static_cast<std::size_t>(width) - digits.size(), '0');
    return std::string(prefix) + digits;
}

/// Builds a world with known ground truth. Draw order is fixed (centroids,
/// stable points, mislabels, changing points, unstable points, sites), so a
/// seed determines every output byte.
inline World generate_world(const SynthConfig& config) {
    validate(config);
    Rng rng(config.seed);
    World world;
    world.lulc_years = config.lulc_years;
    world.data.window = config.years;
    world.data.dimension = config.dimension;
    auto& truth = world.truth;

    std::vector<LulcClass> classes;
    for (std::size_t i = 0; i < config.n_classes; ++i) classes.emplace_back(kClassOrder[i]);
    auto present = [&](LulcKind k) { return std::find(classes.begin(), classes.end(), LulcClass(k)) != classes.end(); };

    // Class centroids: rejection sampling on pairwise cosine.
    const auto family = random_unit(config.dimension, rng);
    const double max_cos = 1.0 - config.centroid_min_separation;
    for (const auto& cls : classes) {
        std::size_t attempts = 0;
        while (true) {
            if (++attempts > config.retry_budget) {
                throw Error(ErrorCode::SeparationInfeasible, "could not place centroid for " + cls.name());
            }
            auto v = random_unit(config.dimension, rng);
            if (forest_family(cls.kind())) {
                const double a = std::sqrt(config.forest_affinity);
                const double b = std::sqrt(1.0 - config.forest_affinity);
                for (std::size_t i = 0; i < v.size(); ++i) v[i] = a * family[i] + b * v[i];
                v = normalized(std::move(v));
            }
            bool ok = true;
            for (const auto& [other, c] : truth.centroids) {
                if (oracle_similarity(v, c.raw()) > max_cos) {
                    ok = false;
                    break;
                }
            }
            if (ok) {
                truth.centroids.emplace(cls, EmbeddingVector(std::move(v)));
                break;
            }
        }
    }

    std::size_t next_point = 0;
    auto place = [&](ReferencePoint& p) {
        p.point_id = pad_id("ref_", next_point++, 6);
        p.lon = rng.uniform(config.lon_min, config.lon_max);
        p.lat = rng.uniform(config.lat_min, config.lat_max);
    };
    auto label_all = [&](ReferencePoint& p, const LulcClass& cls) {
        for (int y = config.lulc_years.first; y <= config.lulc_years.last; ++y) p.lulc_series.emplace(y, cls);
    };

    // Stable points
    for (const auto& cls : classes) {
        for (std::size_t i = 0; i < config.points_per_class; ++i) {
            ReferencePoint p;
            place(p);
            label_all(p, cls);
            for (int y = config.years.first; y <= config.years.last; ++y) {
                p.embeddings.emplace(y, with_noise(truth.centroids.at(cls).raw(), config.noise_sigma, rng));
            }
            truth.rows.push_back({p.point_id, "stable", cls, {}, {}, {}, {}});
            world.data.references.push_back(std::move(p));
        }
    }

    // Points labelled as one stable class whose embeddings come from another
    if (config.n_mislabeled > 0) {
        if (!present(config.mislabel_class) || !present(config.mislabel_source)) {
            throw Error(ErrorCode::InvalidArgument, "mislabel classes are not part of the world");
        }
        for (std::size_t i = 0; i < config.n_mislabeled; ++i) {
            ReferencePoint p;
            place(p);
            label_all(p, config.mislabel_class);
            for (int y = config.years.first; y <= config.years.last; ++y) {
                p.embeddings.emplace(
                    y, with_noise(truth.centroids.at(config.mislabel_source).raw(), config.noise_sigma, rng));
            }
            truth.rows.push_back(
                {p.point_id, "mislabeled", LulcClass(config.mislabel_source), LulcClass(config.mislabel_class), {}, {}, {}});
            world.data.references.push_back(std::move(p));
        }
    }

    // Changing points: interpolate source -> target across the embedding window.
    for (const auto& [from_kind, to_kind] : config.transitions) {
        if (!present(from_kind) || !present(to_kind)) continue;
        const LulcClass from(from_kind);
        const LulcClass to(to_kind);
        for (std::size_t i = 0; i < config.changing_per_transition; ++i) {
            ReferencePoint p;
            place(p);
            for (int y = config.lulc_years.first; y <= config.lulc_years.last; ++y) {
                p.lulc_series.emplace(y, y <= config.change_from.last ? from : to);
            }
            const double span = std::max(1, config.years.last - config.years.first);
            for (int y = config.years.first; y <= config.years.last; ++y) {
                const double f = static_cast<double>(y - config.years.first) / span;
                p.embeddings.emplace(
                    y, with_noise(interpolate(truth.centroids.at(from), truth.centroids.at(to), f), config.noise_sigma, rng));
            }
            truth.rows.push_back({p.point_id, "changing", {}, from, to, config.change_to.first, {}});
            world.data.references.push_back(std::move(p));
        }
    }

    // Unstable points alternate between two classes every year.
    for (std::size_t i = 0; i < config.n_unstable_points; ++i) {
        ReferencePoint p;
        place(p);
        const auto a = static_cast<std::size_t>(rng.below(classes.size()));
        auto b = static_cast<std::size_t>(rng.below(classes.size() - 1));
        if (b >= a) ++b;
        for (int y = config.lulc_years.first; y <= config.lulc_years.last; ++y) {
            p.lulc_series.emplace(y, classes[(y % 2 == 0) ? a : b]);
        }
        for (int y = config.years.first; y <= config.years.last; ++y) {
            p.embeddings.emplace(y, with_noise(truth.centroids.at(p.lulc_series.at(y)).raw(), config.noise_sigma, rng));
        }
        truth.rows.push_back({p.point_id, "unstable", {}, {}, {}, {}, {}});
        world.data.references.push_back(std::move(p));
    }

    // Recovering restoration sites
    const auto& pasture = truth.centroids.at(LulcKind::Pasture);
    const auto& forest = truth.centroids.at(LulcKind::SecondaryForest);
    const auto start_span = static_cast<std::uint64_t>(config.site_start_years.last - config.site_start_years.first + 1);
    for (std::size_t i = 0; i < config.n_sites; ++i) {
        SiteRecord s;
        s.site_id = pad_id("site_", i, 5);
        s.lon = rng.uniform(config.lon_min, config.lon_max);
        s.lat = rng.uniform(config.lat_min, config.lat_max);
        s.area_ha = std::exp(rng.normal(std::log(4.0), 0.9));
        s.start_year = config.site_start_years.first + static_cast<int>(rng.below(start_span));
        const Strategy latent = kAllStrategies[rng.below(kAllStrategies.size())];
        s.strategy = config.independent_strategy_labels ? kAllStrategies[rng.below(kAllStrategies.size())] : latent;
        s.start_lulc = LulcClass(LulcKind::Pasture);
        const double rate = config.recovery_rate_by_strategy.at(latent);
        const double initial = config.initial_progress_max > 0 ? rng.uniform(0.0, config.initial_progress_max) : 0.0;

        // Site-level covariates, re-drawn lightly each year.
        const double precip = rng.uniform(1100, 1700);
        const double tmin = rng.uniform(10, 16);
        const double trange = rng.uniform(8, 14);
        const double et = rng.uniform(800, 1200);
        const double elevation = rng.uniform(300, 1200);
        const double slope = rng.uniform(0, 30);
        const double aspect = rng.uniform(0, 359.9);
        const double cover = rng.uniform(0.05, 0.6);
        const double roads = rng.uniform(0, 3);

        for (int y = config.years.first; y <= config.years.last; ++y) {
            const int dt = y - s.start_year;
            const double f = std::min(1.0, initial + rate * std::max(0, dt));
            const auto clean = interpolate(pasture, forest, f);
            truth.expected_similarity[s.site_id][y] = oracle_similarity(clean, forest.raw());
            s.embeddings.emplace(y, with_noise(clean, config.noise_sigma, rng));

            const double ndvi = std::clamp(0.35 + 0.45 * f + rng.normal(0.0, 0.03), -1.0, 1.0);
            const double evi = 0.2 + 0.35 * f + rng.normal(0.0, 0.03);
            s.spectral.emplace(y, SpectralValues{ndvi, evi});

            const double t_lo = tmin + rng.normal(0.0, 0.3);
            CovariateSet c{std::max(0.0, precip + rng.normal(0.0, 50.0)),
                           t_lo,
                           t_lo + trange,
                           std::max(0.0, et + rng.normal(0.0, 20.0)),
                           elevation,
                           slope,
                           aspect,
                           cover,
                           roads};
            s.covariates.emplace(y, c);
        }
        truth.rows.push_back({s.site_id, "site", LulcClass(LulcKind::Pasture), LulcClass(LulcKind::Pasture),
                              LulcClass(LulcKind::SecondaryForest), {}, rate});
        world.data.sites.push_back(std::move(s));
    }

    std::sort(truth.rows.begin(), truth.rows.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    return world;
}

inline void write_ground_truth(const std::filesystem::path& path, const GroundTruth& truth) {
    csv::Writer out({"id", "kind", "true_class", "from", "to", "transition_year", "rate"});
    auto cls = [](const std::optional<LulcClass>& c) { return c ? c->name() : std::string{}; };
    for (const auto& r : truth.rows) {
        out.row({r.id, r.kind, cls(r.true_class), cls(r.from), cls(r.to),
                 r.transition_year ? std::to_string(*r.transition_year) : std::string{},
                 r.rate ? csv::format_double(*r.rate) : std::string{}});
    }
    out.save(path);
}

/// Writes the ingest-format tables plus ground_truth.csv; returns the paths.
inline std::vector<std::filesystem::path> write_world(const World& world, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    write_embeddings(dir / "embeddings.csv", world.data.dimension, world.data.sites, world.data.references);
    write_sites(dir, world.data.sites);
    write_reference_points(dir / "reference_points.csv", world.data.references, world.codes, world.lulc_years);
    write_lulc_codes(dir / "lulc_codes.csv", world.codes);
    write_ground_truth(dir / "ground_truth.csv", world.truth);
    return {dir / "embeddings.csv",       dir / "sites.csv",      dir / "spectral.csv", dir / "covariates.csv",
            dir / "reference_points.csv", dir / "lulc_codes.csv", dir / "ground_truth.csv"};
}

}  // namespace reftraj::synth
