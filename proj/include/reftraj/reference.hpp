#pragma once

#include <algorithm>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "reftraj/core.hpp"
#include "reftraj/geo.hpp"
#include "reftraj/similarity.hpp"

namespace reftraj {

// ---------------------------------------------------------------------------
// Stability classification

struct StabilityRule {
    int min_stable_years = 10;
    int end_year = 2024;
    YearWindow change_from{2017, 2020};
    YearWindow change_to{2021, 2024};
};

/// Stable(c) when the last `min_stable_years` years through `end_year` are
/// all c; otherwise Changing(a, b) when every year of `change_from` is a and
/// every year of `change_to` is b != a; otherwise Neither. A gap inside the
/// stable window prevents Stable.
inline Stability classify_stability(const std::map<int, LulcClass>& series, const StabilityRule& rule = {}) {
    auto require_years = [&](int first, int last) {
        for (int y = first; y <= last; ++y) {
            if (!series.contains(y)) {
                throw Error(ErrorCode::InsufficientSeries, "series has no label for " + std::to_string(y));
            }
        }
    };
    require_years(rule.end_year, rule.end_year);
    require_years(rule.change_from.first, rule.change_from.last);
    require_years(rule.change_to.first, rule.change_to.last);

    const LulcClass last = series.at(rule.end_year);
    bool stable = rule.min_stable_years > 0;
    for (int y = rule.end_year - rule.min_stable_years + 1; stable && y <= rule.end_year; ++y) {
        const auto it = series.find(y);
        stable = it != series.end() && it->second == last;
    }
    if (stable) return Stability::stable(last);

    auto uniform = [&](const YearWindow& w) -> std::optional<LulcClass> {
        const LulcClass first = series.at(w.first);
        for (int y = w.first + 1; y <= w.last; ++y) {
            if (!(series.at(y) == first)) return std::nullopt;
        }
        return first;
    };
    const auto from = uniform(rule.change_from);
    const auto to = uniform(rule.change_to);
    if (from && to && !(*from == *to)) return Stability::changing(*from, *to);
    return Stability::neither();
}

/// Copies of `points` with the stability field filled in.
inline std::vector<ReferencePoint> classify_points(std::vector<ReferencePoint> points, const StabilityRule& rule = {}) {
    for (auto& p : points) {
        p.stability = classify_stability(p.lulc_series, rule);
    }
    return points;
}

// ---------------------------------------------------------------------------
// Reference set

struct ReferenceYearPolicy {
    enum class Kind { FixedYear, PerYear };
    Kind kind = Kind::FixedYear;
    int year = 2024;

    static ReferenceYearPolicy fixed(int y) { return {Kind::FixedYear, y}; }
    static ReferenceYearPolicy per_year() { return {Kind::PerYear, 0}; }
};

struct SecondaryPoint {
    std::string point_id;
    double lon = 0.0;
    double lat = 0.0;
    std::map<int, EmbeddingVector> embeddings;  ///< only the policy year under FixedYear
};

/// Global reference r̄ (mean of stable SecondaryForest members), class
/// centroids and the secondary-forest point list. Under FixedYear every map
/// has a single key, the policy year, and lookups ignore the requested year.
struct ReferenceSet {
    ReferenceYearPolicy policy;
    std::map<int, EmbeddingVector> global;
    std::map<int, std::vector<std::string>> global_members;  ///< sorted point ids
    std::map<int, std::map<LulcClass, EmbeddingVector>> centroids;
    std::vector<SecondaryPoint> secondary_points;  ///< sorted by point_id

    int key_year(int year) const { return policy.kind == ReferenceYearPolicy::Kind::FixedYear ? policy.year : year; }

    /// Year used for single-year summaries: the fixed year, or the latest year.
    int anchor_year() const {
        if (policy.kind == ReferenceYearPolicy::Kind::FixedYear || global.empty()) return policy.year;
        return global.rbegin()->first;
    }

    const EmbeddingVector* global_ref(int year) const {
        const auto it = global.find(key_year(year));
        return it == global.end() ? nullptr : &it->second;
    }

    const std::map<LulcClass, EmbeddingVector>* centroids_at(int year) const {
        const auto it = centroids.find(key_year(year));
        return it == centroids.end() ? nullptr : &it->second;
    }

    const EmbeddingVector* secondary_embedding(const SecondaryPoint& p, int year) const {
        const auto it = p.embeddings.find(key_year(year));
        return it == p.embeddings.end() ? nullptr : &it->second;
    }
};

/// Builds the reference set from classified points (unclassified points are
/// ignored). Means are summed in point_id order so results are reproducible
/// bit for bit regardless of input order.
inline ReferenceSet build_reference_set(const std::vector<ReferencePoint>& points, const ReferenceYearPolicy& policy = {}) {
    std::vector<const ReferencePoint*> stable;
    for (const auto& p : points) {
        if (p.stability && p.stability->is_stable()) stable.push_back(&p);
    }
    std::sort(stable.begin(), stable.end(), [](const auto* a, const auto* b) { return a->point_id < b->point_id; });

    std::vector<int> years;
    if (policy.kind == ReferenceYearPolicy::Kind::FixedYear) {
        years.push_back(policy.year);
    } else {
        std::vector<int> all;
        for (const auto* p : stable)
            for (const auto& [y, v] : p->embeddings) all.push_back(y);
        std::sort(all.begin(), all.end());
        all.erase(std::unique(all.begin(), all.end()), all.end());
        years = std::move(all);
    }

    ReferenceSet set;
    set.policy = policy;
    for (int year : years) {
        std::map<LulcClass, std::vector<const EmbeddingVector*>> members;
        std::vector<std::string> secondary_ids;
        for (const auto* p : stable) {
            const auto it = p->embeddings.find(year);
            if (it == p->embeddings.end()) continue;
            members[p->stability->from()].push_back(&it->second);
            if (p->stability->from() == LulcClass(LulcKind::SecondaryForest)) {
                secondary_ids.push_back(p->point_id);
            }
        }
        for (const auto& [cls, vecs] : members) {
            set.centroids[year].emplace(cls, mean_of(vecs));
        }
        const auto sec = members.find(LulcKind::SecondaryForest);
        if (sec != members.end()) {
            set.global.emplace(year, mean_of(sec->second));
            set.global_members.emplace(year, std::move(secondary_ids));
        }
    }
    if (set.global.empty()) {
        throw Error(ErrorCode::NoSecondaryForestPoints,
                    "no stable SecondaryForest point has an embedding for the reference year(s)");
    }

    for (const auto* p : stable) {
        if (!(p->stability->from() == LulcClass(LulcKind::SecondaryForest))) continue;
        SecondaryPoint sp{p->point_id, p->lon, p->lat, {}};
        for (int year : years) {
            const auto it = p->embeddings.find(year);
            if (it != p->embeddings.end()) sp.embeddings.emplace(year, it->second);
        }
        if (!sp.embeddings.empty()) set.secondary_points.push_back(std::move(sp));
    }
    return set;
}

// ---------------------------------------------------------------------------
// Local reference

struct LocalReference {
    const SecondaryPoint* point = nullptr;
    double distance_km = 0.0;
};

/// Nearest secondary-forest point by haversine distance; ties go to the
/// lexicographically smallest point_id.
inline LocalReference find_local_reference(double lon, double lat, const ReferenceSet& refset) {
    if (refset.secondary_points.empty()) {
        throw Error(ErrorCode::NoSecondaryForestPoints, "reference set has no secondary-forest points");
    }
    LocalReference best;
    best.distance_km = std::numeric_limits<double>::infinity();
    for (const auto& p : refset.secondary_points) {
        const double d = haversine_km(lon, lat, p.lon, p.lat);
        if (d < best.distance_km || (d == best.distance_km && best.point && p.point_id < best.point->point_id)) {
            best.point = &p;
            best.distance_km = d;
        }
    }
    return best;
}

inline LocalReference find_local_reference(const SiteRecord& site, const ReferenceSet& refset) {
    return find_local_reference(site.lon, site.lat, refset);
}

// ---------------------------------------------------------------------------
// Outliers

enum class DistanceMetric { Cosine, Euclidean };

struct OutlierEntry {
    std::string point_id;
    double distance = 0.0;
};

struct OutlierReport {
    LulcClass cls;
    std::vector<OutlierEntry> ranked;  ///< distance non-increasing
};

/// Ranks the stable members of `cls` (with an embedding at the reference
/// anchor year) by distance from the class centroid, farthest first.
inline OutlierReport detect_outliers(const std::vector<ReferencePoint>& points, const LulcClass& cls,
                                     const ReferenceSet& refset, std::size_t top_k,
                                     DistanceMetric metric = DistanceMetric::Cosine) {
    const int year = refset.anchor_year();
    const auto* centroids = refset.centroids_at(year);
    if (!centroids || !centroids->contains(cls)) {
        throw Error(ErrorCode::NoCentroidForClass, "no centroid for class " + cls.name());
    }
    const auto centroid = centroids->find(cls);
    OutlierReport report{cls, {}};
    for (const auto& p : points) {
        if (!p.stability || !p.stability->is_stable() || !(p.stability->from() == cls)) continue;
        const auto it = p.embeddings.find(year);
        if (it == p.embeddings.end()) continue;
        const double d = metric == DistanceMetric::Cosine
                             ? cosine_distance(it->second, centroid->second)
                             : euclidean_distance(it->second.values(), centroid->second.values());
        report.ranked.push_back({p.point_id, std::max(0.0, d)});
    }
    std::sort(report.ranked.begin(), report.ranked.end(), [](const auto& a, const auto& b) {
        if (a.distance != b.distance) return a.distance > b.distance;
        return a.point_id < b.point_id;
    });
    if (report.ranked.size() > top_k) report.ranked.resize(top_k);
    return report;
}

}  // namespace reftraj
