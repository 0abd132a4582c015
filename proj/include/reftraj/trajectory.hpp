#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "reftraj/core.hpp"
#include "reftraj/parallel.hpp"
#include "reftraj/reference.hpp"
#include "reftraj/similarity.hpp"

namespace reftraj {

enum class ReferenceKind { Global, Local };

inline std::string_view to_string(ReferenceKind k) { return k == ReferenceKind::Global ? "global" : "local"; }

struct TrajectorySample {
    int year = 0;
    int delta_t = 0;
    double similarity = 0.0;
};

struct Improvement {
    double value = 0.0;
    bool degenerate = true;
};

struct SimilarityTrajectory {
    std::string site_id;
    ReferenceKind reference = ReferenceKind::Global;
    std::string local_point_id;  ///< set for Local trajectories
    std::vector<TrajectorySample> samples;  ///< sorted by year
    Improvement improvement;
};

/// s(largest nonnegative Δt) - s(Δt = 0). Negative Δt samples never count.
/// Without a Δt = 0 sample the earliest nonnegative one stands in and the
/// result is flagged degenerate; a single usable sample gives 0, flagged.
inline Improvement improvement_score(const SimilarityTrajectory& traj) {
    const TrajectorySample* first = nullptr;
    const TrajectorySample* last = nullptr;
    for (const auto& s : traj.samples) {
        if (s.delta_t < 0) continue;
        if (!first || s.delta_t < first->delta_t) first = &s;
        if (!last || s.delta_t > last->delta_t) last = &s;
    }
    if (!first || first == last) return {0.0, true};
    return {last->similarity - first->similarity, first->delta_t != 0};
}

/// One sample per embedding year (including pre-start years). Years for which
/// the reference has no embedding (possible under the PerYear policy) are
/// skipped.
inline SimilarityTrajectory build_trajectory(const SiteRecord& site, const ReferenceSet& refset, ReferenceKind kind) {
    if (site.embeddings.empty()) {
        throw Error(ErrorCode::NoEmbeddings, "site " + site.site_id + " has no embeddings");
    }
    SimilarityTrajectory traj;
    traj.site_id = site.site_id;
    traj.reference = kind;
    const SecondaryPoint* neighbour = nullptr;
    if (kind == ReferenceKind::Local) {
        neighbour = find_local_reference(site, refset).point;
        traj.local_point_id = neighbour->point_id;
    }
    for (const auto& [year, e] : site.embeddings) {
        const EmbeddingVector* ref =
            kind == ReferenceKind::Global ? refset.global_ref(year) : refset.secondary_embedding(*neighbour, year);
        if (!ref) continue;
        traj.samples.push_back({year, year - site.start_year, cosine_similarity(e, *ref)});
    }
    traj.improvement = improvement_score(traj);
    return traj;
}

/// Trajectories for many sites, output in input order.
inline std::vector<SimilarityTrajectory> build_trajectories(const std::vector<SiteRecord>& sites,
                                                            const ReferenceSet& refset, ReferenceKind kind,
                                                            std::size_t threads = 1) {
    std::vector<SimilarityTrajectory> out(sites.size());
    parallel_for(sites.size(), threads, [&](std::size_t i) { out[i] = build_trajectory(sites[i], refset, kind); });
    return out;
}

// ---------------------------------------------------------------------------
// Baselines

struct BaselineBand {
    double upper = 0.0;  ///< stable PrimaryForest mean similarity to r̄
    double lower = 0.0;  ///< stable Pasture mean similarity to r̄
    std::size_t n_upper = 0;
    std::size_t n_lower = 0;
};

inline BaselineBand compute_baselines(const std::vector<ReferencePoint>& points, const ReferenceSet& refset) {
    const int year = refset.anchor_year();
    const auto* ref = refset.global_ref(year);
    if (!ref) {
        throw Error(ErrorCode::NoSecondaryForestPoints, "no global reference for " + std::to_string(year));
    }
    std::vector<const ReferencePoint*> sorted;
    for (const auto& p : points) sorted.push_back(&p);
    std::sort(sorted.begin(), sorted.end(), [](const auto* a, const auto* b) { return a->point_id < b->point_id; });

    auto band = [&](LulcKind kind, std::size_t& n) {
        double sum = 0.0;
        for (const auto* p : sorted) {
            if (!p->stability || !p->stability->is_stable() || !(p->stability->from() == LulcClass(kind))) continue;
            const auto it = p->embeddings.find(year);
            if (it == p->embeddings.end()) continue;
            sum += cosine_similarity(it->second, *ref);
            ++n;
        }
        if (n == 0) {
            throw Error(ErrorCode::MissingBaselineClass,
                        "no stable " + LulcClass(kind).name() + " point with a " + std::to_string(year) + " embedding");
        }
        return sum / static_cast<double>(n);
    };
    BaselineBand out;
    out.upper = band(LulcKind::PrimaryForest, out.n_upper);
    out.lower = band(LulcKind::Pasture, out.n_lower);
    return out;
}

// ---------------------------------------------------------------------------
// Grouped curves

enum class GroupBy { StartLulc, Strategy, StartYear };

inline std::string_view to_string(GroupBy g) {
    switch (g) {
        case GroupBy::StartLulc: return "start_lulc";
        case GroupBy::Strategy: return "strategy";
        case GroupBy::StartYear: return "start_year";
    }
    return "start_lulc";
}

inline std::optional<GroupBy> parse_group_by(std::string_view text) {
    for (auto g : {GroupBy::StartLulc, GroupBy::Strategy, GroupBy::StartYear}) {
        if (detail::fold_label(text) == detail::fold_label(to_string(g))) return g;
    }
    return std::nullopt;
}

inline std::string group_key(const SiteRecord& site, GroupBy by) {
    switch (by) {
        case GroupBy::StartLulc: return site.start_lulc ? site.start_lulc->name() : "Unknown";
        case GroupBy::Strategy: return std::string(label(site.strategy));
        case GroupBy::StartYear: return std::to_string(site.start_year);
    }
    return {};
}

struct AggregateRow {
    std::string group;
    int delta_t = 0;
    double mean = 0.0;
    double sd = 0.0;  ///< sample standard deviation, 0 when n = 1
    std::size_t n = 0;
};

/// Pointwise mean/sd per (group, Δt). Trajectories whose site is not in
/// `sites` are ignored. Sums run in (group, site_id) order.
inline std::vector<AggregateRow> aggregate_trajectories(const std::vector<SimilarityTrajectory>& trajs,
                                                        const std::vector<SiteRecord>& sites, GroupBy by) {
    std::map<std::string, const SiteRecord*> site_by_id;
    for (const auto& s : sites) site_by_id.emplace(s.site_id, &s);

    // (group, delta_t) -> values ordered by site_id
    std::map<std::pair<std::string, int>, std::map<std::string, double>> cells;
    for (const auto& t : trajs) {
        const auto it = site_by_id.find(t.site_id);
        if (it == site_by_id.end()) continue;
        const auto key = group_key(*it->second, by);
        for (const auto& s : t.samples) {
            cells[{key, s.delta_t}][t.site_id] = s.similarity;
        }
    }
    std::vector<AggregateRow> out;
    for (const auto& [key, values] : cells) {
        AggregateRow row{key.first, key.second, 0.0, 0.0, values.size()};
        double sum = 0.0;
        for (const auto& [id, v] : values) sum += v;
        row.mean = sum / static_cast<double>(row.n);
        if (row.n > 1) {
            double ss = 0.0;
            for (const auto& [id, v] : values) ss += (v - row.mean) * (v - row.mean);
            row.sd = std::sqrt(ss / static_cast<double>(row.n - 1));
        }
        out.push_back(std::move(row));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Spectral comparison

struct SpectralSample {
    int year = 0;
    int delta_t = 0;
    double ndvi = 0.0;
    double evi = 0.0;
};

inline std::vector<SpectralSample> spectral_trajectory(const SiteRecord& site) {
    std::vector<SpectralSample> out;
    out.reserve(site.spectral.size());
    for (const auto& [year, v] : site.spectral) {
        out.push_back({year, year - site.start_year, v.ndvi, v.evi});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Nearest-class trajectories

struct ClassStep {
    int year = 0;
    LulcClass nearest;
    double similarity = 0.0;
    std::optional<double> change_magnitude;  ///< 1 - cos(e_t, e_prev); none for the first year
};

struct ClassTransition {
    int year = 0;
    LulcClass from;
    LulcClass to;
};

struct ClassTrajectory {
    std::string id;
    std::vector<ClassStep> steps;
    std::vector<ClassTransition> transitions;
};

/// Nearest centroid per year by cosine similarity (ties to the smaller class
/// name); a transition is recorded whenever the nearest class differs from the
/// previous available year's.
inline ClassTrajectory classify_trajectory(const std::string& id, const std::map<int, EmbeddingVector>& embeddings,
                                           const ReferenceSet& refset) {
    const auto* anchor = refset.centroids_at(refset.anchor_year());
    if (!anchor || anchor->size() < 2) {
        throw Error(ErrorCode::TooFewCentroids, "nearest-class tracking needs at least two class centroids");
    }
    ClassTrajectory out;
    out.id = id;
    const EmbeddingVector* previous = nullptr;
    for (const auto& [year, e] : embeddings) {
        const auto* centroids = refset.centroids_at(year);
        if (!centroids) continue;
        if (centroids->size() < 2) {
            throw Error(ErrorCode::TooFewCentroids, "fewer than two centroids for " + std::to_string(year));
        }
        ClassStep step;
        step.year = year;
        bool first = true;
        // std::map iterates in class-name order, so strict > keeps the smaller name on ties.
        for (const auto& [cls, c] : *centroids) {
            const double s = cosine_similarity(e, c);
            if (first || s > step.similarity) {
                step.nearest = cls;
                step.similarity = s;
                first = false;
            }
        }
        if (previous) {
            step.change_magnitude = 1.0 - cosine_similarity(e, *previous);
            const auto& before = out.steps.back().nearest;
            if (!(before == step.nearest)) {
                out.transitions.push_back({year, before, step.nearest});
            }
        }
        out.steps.push_back(step);
        previous = &e;
    }
    return out;
}

inline ClassTrajectory classify_trajectory(const SiteRecord& site, const ReferenceSet& refset) {
    return classify_trajectory(site.site_id, site.embeddings, refset);
}

inline ClassTrajectory classify_trajectory(const ReferencePoint& point, const ReferenceSet& refset) {
    return classify_trajectory(point.point_id, point.embeddings, refset);
}

}  // namespace reftraj
