#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <compare>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "reftraj/error.hpp"

namespace reftraj {

inline constexpr std::size_t kDefaultDimension = 64;

// ---------------------------------------------------------------------------
// Embedding vectors

/// A finite real vector of a dataset-wide dimension. Not assumed unit-norm.
class EmbeddingVector {
public:
    EmbeddingVector() = default;

    /// Rejects NaN/Inf entries; dimension is checked by validate_embedding().
    explicit EmbeddingVector(std::vector<double> values) : values_(std::move(values)) {
        for (std::size_t i = 0; i < values_.size(); ++i) {
            if (!std::isfinite(values_[i])) {
                throw Error(ErrorCode::NonFinite,
                            "embedding entry " + std::to_string(i) + " is not finite");
            }
        }
    }

    std::size_t size() const noexcept { return values_.size(); }
    bool empty() const noexcept { return values_.empty(); }
    double operator[](std::size_t i) const { return values_[i]; }
    std::span<const double> values() const noexcept { return values_; }
    const std::vector<double>& raw() const noexcept { return values_; }

    friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;

private:
    std::vector<double> values_;
};

inline EmbeddingVector validate_embedding(std::span<const double> values, std::size_t dimension) {
    if (values.size() != dimension) {
        throw Error(ErrorCode::WrongDimension, "expected " + std::to_string(dimension) +
                                                   " values, got " + std::to_string(values.size()));
    }
    return EmbeddingVector(std::vector<double>(values.begin(), values.end()));
}

inline double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw Error(ErrorCode::WrongDimension, "dimension mismatch " + std::to_string(a.size()) +
                                                   " vs " + std::to_string(b.size()));
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sum += a[i] * b[i];
    }
    return sum;
}

inline double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

/// Componentwise mean, summed in the order given.
inline EmbeddingVector mean_of(std::span<const EmbeddingVector* const> members) {
    if (members.empty()) {
        throw Error(ErrorCode::InvalidArgument, "mean of zero vectors");
    }
    std::vector<double> sum(members.front()->size(), 0.0);
    for (const auto* v : members) {
        if (v->size() != sum.size()) {
            throw Error(ErrorCode::WrongDimension, "mixed dimensions in mean");
        }
        for (std::size_t i = 0; i < sum.size(); ++i) {
            sum[i] += (*v)[i];
        }
    }
    const auto n = static_cast<double>(members.size());
    for (auto& x : sum) {
        x /= n;
    }
    return EmbeddingVector(std::move(sum));
}

// ---------------------------------------------------------------------------
// Land use / land cover classes

enum class LulcKind {
    PrimaryForest,
    SecondaryForest,
    ForestFormation,
    ForestPlantation,
    Wetland,
    SugarCane,
    Coffee,
    Grassland,
    Pasture,
    Urban,
    Other,
};

inline constexpr std::array<std::pair<LulcKind, std::string_view>, 10> kLulcNames{{
    {LulcKind::PrimaryForest, "PrimaryForest"},
    {LulcKind::SecondaryForest, "SecondaryForest"},
    {LulcKind::ForestFormation, "ForestFormation"},
    {LulcKind::ForestPlantation, "ForestPlantation"},
    {LulcKind::Wetland, "Wetland"},
    {LulcKind::SugarCane, "SugarCane"},
    {LulcKind::Coffee, "Coffee"},
    {LulcKind::Grassland, "Grassland"},
    {LulcKind::Pasture, "Pasture"},
    {LulcKind::Urban, "Urban"},
}};

namespace detail {

/// Lowercase with spaces, '_' and '-' removed: "Sugar Cane" == "sugar_cane".
inline std::string fold_label(std::string_view s) {
    std::string out;
    for (char c : s) {
        if (c == ' ' || c == '_' || c == '-' || c == '\t' || c == '\r') continue;
        out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    return out;
}

}  // namespace detail

/// A named class, or Other(code) for source codes without a mapping.
/// Ordering is lexicographic by name, which is also the tie-break order.
class LulcClass {
public:
    constexpr LulcClass() = default;
    constexpr LulcClass(LulcKind kind) : kind_(kind) {}  // NOLINT: implicit by design of the alphabet
    static constexpr LulcClass other(int code) {
        LulcClass c(LulcKind::Other);
        c.code_ = code;
        return c;
    }

    constexpr LulcKind kind() const { return kind_; }
    constexpr int other_code() const { return code_; }
    constexpr bool is_other() const { return kind_ == LulcKind::Other; }

    std::string name() const {
        if (kind_ == LulcKind::Other) {
            return "Other(" + std::to_string(code_) + ")";
        }
        for (const auto& [kind, label] : kLulcNames) {
            if (kind == kind_) return std::string(label);
        }
        return "Other";
    }

    /// Accepts canonical names, spaced variants ("Sugar Cane") and "Other(N)".
    static std::optional<LulcClass> parse(std::string_view text) {
        const auto folded = detail::fold_label(text);
        for (const auto& [kind, label] : kLulcNames) {
            if (detail::fold_label(label) == folded) return LulcClass(kind);
        }
        if (folded.size() > 7 && folded.starts_with("other(") && folded.back() == ')') {
            try {
                std::size_t used = 0;
                const auto digits = folded.substr(6, folded.size() - 7);
                const int code = std::stoi(digits, &used);
                if (used == digits.size()) return other(code);
            } catch (const std::exception&) {
            }
        }
        return std::nullopt;
    }

    friend constexpr bool operator==(const LulcClass& a, const LulcClass& b) {
        return a.kind_ == b.kind_ && (a.kind_ != LulcKind::Other || a.code_ == b.code_);
    }
    friend std::strong_ordering operator<=>(const LulcClass& a, const LulcClass& b) {
        if (a == b) return std::strong_ordering::equal;
        return a.name() < b.name() ? std::strong_ordering::less : std::strong_ordering::greater;
    }

private:
    LulcKind kind_ = LulcKind::Other;
    int code_ = 0;
};

/// Bijective integer-code <-> class mapping. Unmapped codes resolve to
/// Other(code) and are reported, never dropped.
class LulcCodeTable {
public:
    LulcCodeTable() = default;

    void add(int code, LulcClass cls) {
        if (by_code_.contains(code)) {
            throw Error(ErrorCode::DuplicateKey, "LULC code " + std::to_string(code) + " mapped twice");
        }
        for (const auto& [existing_code, existing] : by_code_) {
            if (existing == cls) {
                throw Error(ErrorCode::DuplicateKey, "LULC class " + cls.name() + " mapped to codes " +
                                                         std::to_string(existing_code) + " and " +
                                                         std::to_string(code));
            }
        }
        by_code_.emplace(code, cls);
    }

    /// Class for a code, and whether the code was mapped.
    std::pair<LulcClass, bool> lookup(int code) const {
        const auto it = by_code_.find(code);
        if (it == by_code_.end()) return {LulcClass::other(code), false};
        return {it->second, true};
    }

    std::optional<int> code_of(const LulcClass& cls) const {
        if (cls.is_other()) return cls.other_code();
        for (const auto& [code, mapped] : by_code_) {
            if (mapped == cls) return code;
        }
        return std::nullopt;
    }

    const std::map<int, LulcClass>& entries() const { return by_code_; }

    /// MapBiomas Collection 10 codes; primary/secondary forest come from the
    /// secondary-vegetation product and use the 301/302 convention.
    static LulcCodeTable mapbiomas_default() {
        LulcCodeTable t;
        t.add(3, LulcKind::ForestFormation);
        t.add(9, LulcKind::ForestPlantation);
        t.add(11, LulcKind::Wetland);
        t.add(12, LulcKind::Grassland);
        t.add(15, LulcKind::Pasture);
        t.add(20, LulcKind::SugarCane);
        t.add(24, LulcKind::Urban);
        t.add(46, LulcKind::Coffee);
        t.add(301, LulcKind::PrimaryForest);
        t.add(302, LulcKind::SecondaryForest);
        return t;
    }

private:
    std::map<int, LulcClass> by_code_;
};

// ---------------------------------------------------------------------------
// Restoration strategy

enum class Strategy {
    NaturalRegenMgmt,
    NaturalRegenNoMgmt,
    FullAreaPlanting,
    Agroforestry,
    NotIdentified,
};

inline constexpr std::array<Strategy, 5> kAllStrategies{
    Strategy::NaturalRegenMgmt, Strategy::NaturalRegenNoMgmt, Strategy::FullAreaPlanting,
    Strategy::Agroforestry, Strategy::NotIdentified};

inline std::string_view label(Strategy s) {
    switch (s) {
        case Strategy::NaturalRegenMgmt: return "Natural Regeneration with Management";
        case Strategy::NaturalRegenNoMgmt: return "Natural Regeneration without Management";
        case Strategy::FullAreaPlanting: return "Full-Area Planting";
        case Strategy::Agroforestry: return "Agroforestry Systems";
        case Strategy::NotIdentified: return "Not Identified";
    }
    return "Not Identified";
}

inline std::string_view identifier(Strategy s) {
    switch (s) {
        case Strategy::NaturalRegenMgmt: return "NaturalRegenMgmt";
        case Strategy::NaturalRegenNoMgmt: return "NaturalRegenNoMgmt";
        case Strategy::FullAreaPlanting: return "FullAreaPlanting";
        case Strategy::Agroforestry: return "Agroforestry";
        case Strategy::NotIdentified: return "NotIdentified";
    }
    return "NotIdentified";
}

/// Empty text means NotIdentified. Throws UnknownStrategy otherwise.
inline Strategy parse_strategy(std::string_view text) {
    const auto folded = detail::fold_label(text);
    if (folded.empty()) return Strategy::NotIdentified;
    for (auto s : kAllStrategies) {
        if (folded == detail::fold_label(label(s)) || folded == detail::fold_label(identifier(s))) {
            return s;
        }
    }
    // Older exports spell the natural-regeneration categories "Natural Generation ...".
    if (folded == "naturalgenerationwithmanagement") return Strategy::NaturalRegenMgmt;
    if (folded == "naturalgenerationwithoutmanagement") return Strategy::NaturalRegenNoMgmt;
    if (folded == "agroforestry") return Strategy::Agroforestry;
    throw Error(ErrorCode::UnknownStrategy, "unknown restoration strategy '" + std::string(text) + "'");
}

// ---------------------------------------------------------------------------
// Per-year auxiliary data

struct SpectralValues {
    double ndvi = 0.0;
    double evi = 0.0;

    friend bool operator==(const SpectralValues&, const SpectralValues&) = default;
};

struct CovariateSet {
    double precip_mm = 0.0;
    double tmin_c = 0.0;
    double tmax_c = 0.0;
    double et_mm = 0.0;
    double elevation_m = 0.0;
    double slope_deg = 0.0;
    double aspect_deg = 0.0;
    double forest_cover_2km = 0.0;
    double road_density_5km = 0.0;

    static constexpr std::size_t kColumns = 9;

    std::array<double, kColumns> as_array() const {
        return {precip_mm, tmin_c, tmax_c, et_mm, elevation_m, slope_deg, aspect_deg, forest_cover_2km,
                road_density_5km};
    }

    friend bool operator==(const CovariateSet&, const CovariateSet&) = default;
};

inline constexpr std::array<std::string_view, CovariateSet::kColumns> kCovariateColumns{
    "precip_mm", "tmin_c", "tmax_c", "et_mm", "elevation_m",
    "slope_deg", "aspect_deg", "forest_cover_2km", "road_density_5km"};

inline void validate(const CovariateSet& c) {
    const auto values = c.as_array();
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!std::isfinite(values[i])) {
            throw Error(ErrorCode::NonFinite, std::string(kCovariateColumns[i]) + " is not finite");
        }
    }
    auto fail = [](std::string_view what) { throw Error(ErrorCode::InvalidValue, std::string(what)); };
    if (c.precip_mm < 0) fail("precip_mm must be >= 0");
    if (c.et_mm < 0) fail("et_mm must be >= 0");
    if (c.slope_deg < 0 || c.slope_deg > 90) fail("slope_deg must lie in [0, 90]");
    if (c.aspect_deg < 0 || c.aspect_deg >= 360) fail("aspect_deg must lie in [0, 360)");
    if (c.forest_cover_2km < 0 || c.forest_cover_2km > 1) fail("forest_cover_2km must lie in [0, 1]");
    if (c.road_density_5km < 0) fail("road_density_5km must be >= 0");
    if (c.tmin_c > c.tmax_c) fail("tmin_c must not exceed tmax_c");
}

inline void validate(const SpectralValues& s) {
    if (!std::isfinite(s.ndvi) || !std::isfinite(s.evi)) {
        throw Error(ErrorCode::NonFinite, "spectral value is not finite");
    }
    if (s.ndvi < -1.0 || s.ndvi > 1.0) {
        throw Error(ErrorCode::InvalidValue, "ndvi must lie in [-1, 1]");
    }
}

inline void validate_coordinates(double lon, double lat) {
    if (!std::isfinite(lon) || !std::isfinite(lat) || lat < -90.0 || lat > 90.0 || lon < -180.0 ||
        lon > 180.0) {
        throw Error(ErrorCode::InvalidValue, "coordinates out of range");
    }
}

struct YearWindow {
    int first = 2017;
    int last = 2024;

    bool contains(int year) const { return year >= first && year <= last; }
    friend bool operator==(const YearWindow&, const YearWindow&) = default;
};

// ---------------------------------------------------------------------------
// Records

struct SiteRecord {
    std::string site_id;
    double lon = 0.0;
    double lat = 0.0;
    double area_ha = 0.0;
    int start_year = 0;
    Strategy strategy = Strategy::NotIdentified;
    std::optional<LulcClass> start_lulc;
    std::map<int, EmbeddingVector> embeddings;
    std::map<int, SpectralValues> spectral;
    std::map<int, CovariateSet> covariates;

    friend bool operator==(const SiteRecord&, const SiteRecord&) = default;
};

/// Stable(class), Changing(from, to) with from != to, or Neither.
class Stability {
public:
    enum class Kind { Stable, Changing, Neither };

    static Stability stable(LulcClass cls) { return Stability(Kind::Stable, cls, cls); }
    static Stability changing(LulcClass from, LulcClass to) {
        if (from == to) {
            throw Error(ErrorCode::InvalidArgument, "changing stability requires distinct classes");
        }
        return Stability(Kind::Changing, from, to);
    }
    static Stability neither() { return Stability(Kind::Neither, {}, {}); }

    Kind kind() const { return kind_; }
    bool is_stable() const { return kind_ == Kind::Stable; }
    bool is_changing() const { return kind_ == Kind::Changing; }
    /// Class of a Stable point, source class of a Changing one.
    const LulcClass& from() const { return from_; }
    const LulcClass& to() const { return to_; }

    std::string_view kind_name() const {
        switch (kind_) {
            case Kind::Stable: return "Stable";
            case Kind::Changing: return "Changing";
            case Kind::Neither: return "Neither";
        }
        return "Neither";
    }

    friend bool operator==(const Stability& a, const Stability& b) {
        if (a.kind_ != b.kind_) return false;
        if (a.kind_ == Kind::Neither) return true;
        return a.from_ == b.from_ && a.to_ == b.to_;
    }

private:
    Stability(Kind kind, LulcClass from, LulcClass to) : kind_(kind), from_(from), to_(to) {}

    Kind kind_;
    LulcClass from_;
    LulcClass to_;
};

struct ReferencePoint {
    std::string point_id;
    double lon = 0.0;
    double lat = 0.0;
    std::map<int, LulcClass> lulc_series;
    std::map<int, EmbeddingVector> embeddings;
    std::optional<Stability> stability;  ///< unset until classified

    friend bool operator==(const ReferencePoint&, const ReferencePoint&) = default;
};

}  // namespace reftraj
