#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "reftraj/core.hpp"
#include "reftraj/csv.hpp"

namespace reftraj {

using SiteYear = std::pair<std::string, int>;

struct EmbeddingTable {
    std::size_t dimension = kDefaultDimension;
    std::map<SiteYear, EmbeddingVector> rows;

    /// All years for one id, in year order.
    std::map<int, EmbeddingVector> series(const std::string& id, const YearWindow& window) const {
        std::map<int, EmbeddingVector> out;
        for (auto it = rows.lower_bound({id, window.first});
             it != rows.end() && it->first.first == id && it->first.second <= window.last; ++it) {
            out.emplace(it->first.second, it->second);
        }
        return out;
    }
};

inline std::string embedding_column(std::size_t index) {
    char buffer[32];
    std::snprintf(buffer, sizeof(buffer), "A%02zu", index);
    return buffer;
}

/// Reads `id,year,A00,...`; the number of A-columns fixes the dimension.
inline EmbeddingTable load_embeddings(const std::filesystem::path& path) {
    csv::Reader reader(path);
    const auto id_col = reader.require("id");
    const auto year_col = reader.require("year");

    std::size_t n_embedding_cols = 0;
    for (const auto& name : reader.header()) {
        if (name.size() >= 2 && name[0] == 'A' &&
            std::all_of(name.begin() + 1, name.end(), [](char c) { return c >= '0' && c <= '9'; })) {
            ++n_embedding_cols;
        }
    }
    if (n_embedding_cols == 0) {
        throw Error(ErrorCode::MissingColumn, path.string() + ": no embedding columns A00..", 1);
    }
    std::vector<std::size_t> value_cols;
    value_cols.reserve(n_embedding_cols);
    for (std::size_t i = 0; i < n_embedding_cols; ++i) {
        value_cols.push_back(reader.require(embedding_column(i)));
    }

    EmbeddingTable table;
    table.dimension = n_embedding_cols;
    std::vector<std::string> fields;
    std::vector<double> values(n_embedding_cols);
    while (reader.next(fields)) {
        const auto line = reader.line();
        const auto year = static_cast<int>(csv::parse_int(fields[year_col], line, "year"));
        for (std::size_t i = 0; i < n_embedding_cols; ++i) {
            values[i] = csv::parse_double(fields[value_cols[i]], line, embedding_column(i));
        }
        SiteYear key{std::string(csv::trim(fields[id_col])), year};
        if (key.first.empty()) {
            throw Error(ErrorCode::ParseError, "empty id", line);
        }
        try {
            auto vec = validate_embedding(values, table.dimension);
            if (!table.rows.emplace(key, std::move(vec)).second) {
                throw Error(ErrorCode::DuplicateKey,
                            "duplicate embedding for (" + key.first + ", " + std::to_string(year) + ")",
                            line);
            }
        } catch (const Error& e) {
            if (e.line() != 0) throw;
            throw Error(e.code(), e.detail(), line);
        }
    }
    return table;
}

inline std::map<SiteYear, SpectralValues> load_spectral(const std::filesystem::path& path) {
    csv::Reader reader(path);
    const auto id_col = reader.require("id");
    const auto year_col = reader.require("year");
    const auto ndvi_col = reader.require("ndvi");
    const auto evi_col = reader.require("evi");
    std::map<SiteYear, SpectralValues> out;
    std::vector<std::string> fields;
    while (reader.next(fields)) {
        const auto line = reader.line();
        SiteYear key{std::string(csv::trim(fields[id_col])),
                     static_cast<int>(csv::parse_int(fields[year_col], line, "year"))};
        SpectralValues v{csv::parse_double(fields[ndvi_col], line, "ndvi"),
                         csv::parse_double(fields[evi_col], line, "evi")};
        try {
            validate(v);
        } catch (const Error& e) {
            throw Error(e.code(), e.detail(), line);
        }
        if (!out.emplace(key, v).second) {
            throw Error(ErrorCode::DuplicateKey, "duplicate spectral row for " + key.first, line);
        }
    }
    return out;
}

inline std::map<SiteYear, CovariateSet> load_covariates(const std::filesystem::path& path) {
    csv::Reader reader(path);
    const auto id_col = reader.require("id");
    const auto year_col = reader.require("year");
    std::array<std::size_t, CovariateSet::kColumns> cols{};
    for (std::size_t i = 0; i < cols.size(); ++i) {
        cols[i] = reader.require(kCovariateColumns[i]);
    }
    std::map<SiteYear, CovariateSet> out;
    std::vector<std::string> fields;
    while (reader.next(fields)) {
        const auto line = reader.line();
        SiteYear key{std::string(csv::trim(fields[id_col])),
                     static_cast<int>(csv::parse_int(fields[year_col], line, "year"))};
        std::array<double, CovariateSet::kColumns> v{};
        for (std::size_t i = 0; i < cols.size(); ++i) {
            v[i] = csv::parse_double(fields[cols[i]], line, kCovariateColumns[i]);
        }
        CovariateSet c{v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8]};
        try {
            validate(c);
        } catch (const Error& e) {
            throw Error(e.code(), e.detail(), line);
        }
        if (!out.emplace(key, c).second) {
            throw Error(ErrorCode::DuplicateKey, "duplicate covariate row for " + key.first, line);
        }
    }
    return out;
}

inline LulcCodeTable load_lulc_codes(const std::filesystem::path& path) {
    csv::Reader reader(path);
    const auto code_col = reader.require("code");
    const auto name_col = reader.require("name");
    LulcCodeTable table;
    std::vector<std::string> fields;
    while (reader.next(fields)) {
        const auto line = reader.line();
        const auto code = static_cast<int>(csv::parse_int(fields[code_col], line, "code"));
        const auto cls = LulcClass::parse(fields[name_col]);
        if (!cls) {
            throw Error(ErrorCode::UnknownClass, "unknown LULC class name '" + fields[name_col] + "'", line);
        }
        try {
            table.add(code, *cls);
        } catch (const Error& e) {
            throw Error(e.code(), e.detail(), line);
        }
    }
    return table;
}

struct SiteLoadResult {
    std::vector<SiteRecord> sites;              ///< sorted by site_id
    std::vector<std::string> without_embeddings;  ///< excluded: no embedding year in window
    std::size_t rows_outside_window = 0;
};

/// Joins site metadata with per-year tables. Spectral and covariate paths may
/// be empty; their maps are then empty. Rows outside `window` are skipped and
/// counted. Sites without any embedding year are reported, not kept.
inline SiteLoadResult load_sites(const std::filesystem::path& meta_path, const EmbeddingTable& embeddings,
                                 const std::filesystem::path& spectral_path,
                                 const std::filesystem::path& covariates_path,
                                 const YearWindow& window = {}) {
    csv::Reader reader(meta_path);
    constexpr auto missing = ErrorCode::MissingMetadataField;
    const auto id_col = reader.require("site_id", missing);
    const auto lon_col = reader.require("lon", missing);
    const auto lat_col = reader.require("lat", missing);
    const auto area_col = reader.require("area_ha", missing);
    const auto start_col = reader.require("start_year", missing);
    const auto strategy_col = reader.require("strategy", missing);
    const auto lulc_col = reader.find("start_lulc");

    std::map<std::string, SiteRecord> by_id;
    std::vector<std::string> fields;
    while (reader.next(fields)) {
        const auto line = reader.line();
        auto required = [&](std::size_t col, std::string_view name) {
            const auto v = csv::trim(fields[col]);
            if (v.empty()) {
                throw Error(missing, "empty required field '" + std::string(name) + "'", line);
            }
            return v;
        };
        SiteRecord site;
        site.site_id = std::string(required(id_col, "site_id"));
        site.lon = csv::parse_double(required(lon_col, "lon"), line, "lon");
        site.lat = csv::parse_double(required(lat_col, "lat"), line, "lat");
        site.area_ha = csv::parse_double(required(area_col, "area_ha"), line, "area_ha");
        site.start_year = static_cast<int>(csv::parse_int(required(start_col, "start_year"), line, "start_year"));
        try {
            validate_coordinates(site.lon, site.lat);
            if (!(site.area_ha > 0.0) || !std::isfinite(site.area_ha)) {
                throw Error(ErrorCode::InvalidValue, "area_ha must be > 0");
            }
            site.strategy = parse_strategy(fields[strategy_col]);
        } catch (const Error& e) {
            throw Error(e.code(), e.detail(), line);
        }
        if (lulc_col) {
            const auto text = csv::trim(fields[*lulc_col]);
            if (!text.empty()) {
                site.start_lulc = LulcClass::parse(text);
                if (!site.start_lulc) {
                    throw Error(ErrorCode::UnknownClass, "unknown start_lulc '" + std::string(text) + "'", line);
                }
            }
        }
        const auto id = site.site_id;
        if (!by_id.emplace(id, std::move(site)).second) {
            throw Error(ErrorCode::DuplicateKey, "duplicate site_id '" + id + "'", line);
        }
    }

    SiteLoadResult result;
    for (const auto& [key, vec] : embeddings.rows) {
        const auto it = by_id.find(key.first);
        if (it == by_id.end()) continue;
        if (!window.contains(key.second)) {
            ++result.rows_outside_window;
            continue;
        }
        it->second.embeddings.emplace(key.second, vec);
    }
    if (!spectral_path.empty()) {
        for (const auto& [key, v] : load_spectral(spectral_path)) {
            const auto it = by_id.find(key.first);
            if (it == by_id.end()) continue;
            if (!window.contains(key.second)) {
                ++result.rows_outside_window;
                continue;
            }
            it->second.spectral.emplace(key.second, v);
        }
    }
    if (!covariates_path.empty()) {
        for (const auto& [key, v] : load_covariates(covariates_path)) {
            const auto it = by_id.find(key.first);
            if (it == by_id.end()) continue;
            if (!window.contains(key.second)) {
                ++result.rows_outside_window;
                continue;
            }
            it->second.covariates.emplace(key.second, v);
        }
    }
    for (auto& [id, site] : by_id) {
        if (site.embeddings.empty()) {
            result.without_embeddings.push_back(id);
        } else {
            result.sites.push_back(std::move(site));
        }
    }
    return result;
}

inline std::string lulc_column(int year) { return "lulc_" + std::to_string(year); }

struct ReferenceLoadResult {
    std::vector<ReferencePoint> points;  ///< sorted by point_id, stability unset
    std::map<int, std::size_t> unmapped_codes;  ///< code -> occurrences, mapped to Other(code)
    std::vector<std::string> warnings;
};

/// Reads `point_id,lon,lat,lulc_<Y>...`; every year in `lulc_years` must have
/// a column. Embedding years are restricted to `window`.
inline ReferenceLoadResult load_reference_points(const std::filesystem::path& meta_path,
                                                 const EmbeddingTable& embeddings,
                                                 const LulcCodeTable& codes, const YearWindow& lulc_years,
                                                 const YearWindow& window = {}) {
    csv::Reader reader(meta_path);
    const auto id_col = reader.require("point_id", ErrorCode::MissingMetadataField);
    const auto lon_col = reader.require("lon", ErrorCode::MissingMetadataField);
    const auto lat_col = reader.require("lat", ErrorCode::MissingMetadataField);
    std::vector<std::pair<int, std::size_t>> year_cols;
    for (int y = lulc_years.first; y <= lulc_years.last; ++y) {
        year_cols.emplace_back(y, reader.require(lulc_column(y), ErrorCode::MissingYearColumn));
    }

    ReferenceLoadResult result;
    std::map<std::string, ReferencePoint> by_id;
    std::vector<std::string> fields;
    while (reader.next(fields)) {
        const auto line = reader.line();
        ReferencePoint p;
        p.point_id = std::string(csv::trim(fields[id_col]));
        if (p.point_id.empty()) {
            throw Error(ErrorCode::MissingMetadataField, "empty point_id", line);
        }
        p.lon = csv::parse_double(fields[lon_col], line, "lon");
        p.lat = csv::parse_double(fields[lat_col], line, "lat");
        try {
            validate_coordinates(p.lon, p.lat);
        } catch (const Error& e) {
            throw Error(e.code(), e.detail(), line);
        }
        for (const auto& [year, col] : year_cols) {
            const auto code = static_cast<int>(csv::parse_int(fields[col], line, lulc_column(year)));
            const auto [cls, mapped] = codes.lookup(code);
            if (!mapped) ++result.unmapped_codes[code];
            p.lulc_series.emplace(year, cls);
        }
        p.embeddings = embeddings.series(p.point_id, window);
        const auto id = p.point_id;
        if (!by_id.emplace(id, std::move(p)).second) {
            throw Error(ErrorCode::DuplicateKey, "duplicate point_id '" + id + "'", line);
        }
    }
    for (const auto& [code, count] : result.unmapped_codes) {
        result.warnings.push_back("LULC code " + std::to_string(code) + " is unmapped; " +
                                  std::to_string(count) + " labels kept as Other(" + std::to_string(code) + ")");
    }
    for (auto& [id, p] : by_id) {
        result.points.push_back(std::move(p));
    }
    return result;
}

// ---------------------------------------------------------------------------
// Site filter

struct SiteFilter {
    double min_area_ha = 1.0;
    YearWindow start_years{2017, 2024};
};

/// Drop counts per stage, applied in order: area, then start year.
struct FilterReport {
    std::size_t input = 0;
    std::size_t dropped_area = 0;
    std::size_t dropped_start_year = 0;
    std::size_t kept = 0;

    friend bool operator==(const FilterReport&, const FilterReport&) = default;
};

struct FilterResult {
    std::vector<SiteRecord> kept;
    FilterReport report;
};

inline FilterResult filter_sites(std::vector<SiteRecord> sites, const SiteFilter& rule = {}) {
    FilterResult result;
    result.report.input = sites.size();
    for (auto& site : sites) {
        if (!(site.area_ha >= rule.min_area_ha)) {
            ++result.report.dropped_area;
        } else if (!rule.start_years.contains(site.start_year)) {
            ++result.report.dropped_start_year;
        } else {
            result.kept.push_back(std::move(site));
        }
    }
    result.report.kept = result.kept.size();
    return result;
}

// ---------------------------------------------------------------------------
// Dataset and file layout

struct Dataset {
    std::vector<SiteRecord> sites;
    std::vector<ReferencePoint> references;
    YearWindow window;
    std::size_t dimension = kDefaultDimension;
};

struct DatasetPaths {
    std::filesystem::path embeddings;
    std::filesystem::path sites;
    std::filesystem::path spectral;
    std::filesystem::path covariates;
    std::filesystem::path references;
    std::filesystem::path lulc_codes;

    /// Standard file names inside one directory; optional files that do not
    /// exist are left empty.
    static DatasetPaths in_directory(const std::filesystem::path& dir) {
        DatasetPaths p;
        auto opt = [&](const char* name) {
            const auto path = dir / name;
            return std::filesystem::exists(path) ? path : std::filesystem::path{};
        };
        p.embeddings = dir / "embeddings.csv";
        p.sites = dir / "sites.csv";
        p.spectral = opt("spectral.csv");
        p.covariates = opt("covariates.csv");
        p.references = opt("reference_points.csv");
        p.lulc_codes = opt("lulc_codes.csv");
        return p;
    }
};

struct LoadOptions {
    YearWindow window{2017, 2024};
    YearWindow lulc_years{2015, 2024};
};

struct LoadReport {
    std::vector<std::string> sites_without_embeddings;
    std::size_t rows_outside_window = 0;
    std::vector<std::string> warnings;
};

inline Dataset load_dataset(const DatasetPaths& paths, const LoadOptions& options, LoadReport* report = nullptr) {
    if (options.window.first > options.window.last) {
        throw Error(ErrorCode::InvalidArgument, "empty year window");
    }
    const auto embeddings = load_embeddings(paths.embeddings);
    Dataset data;
    data.window = options.window;
    data.dimension = embeddings.dimension;
    auto sites = load_sites(paths.sites, embeddings, paths.spectral, paths.covariates, options.window);
    data.sites = std::move(sites.sites);
    LoadReport local;
    local.sites_without_embeddings = std::move(sites.without_embeddings);
    local.rows_outside_window = sites.rows_outside_window;
    if (!paths.references.empty()) {
        const auto codes = paths.lulc_codes.empty() ? LulcCodeTable::mapbiomas_default()
                                                    : load_lulc_codes(paths.lulc_codes);
        auto refs = load_reference_points(paths.references, embeddings, codes, options.lulc_years, options.window);
        data.references = std::move(refs.points);
        local.warnings = std::move(refs.warnings);
    }
    if (report) *report = std::move(local);
    return data;
}

// ---------------------------------------------------------------------------
// Writers (inverse of the loaders; rows sorted by key)

inline void write_embeddings(const std::filesystem::path& path, std::size_t dimension,
                             const std::vector<SiteRecord>& sites, const std::vector<ReferencePoint>& points) {
    std::vector<std::string> header{"id", "year"};
    for (std::size_t i = 0; i < dimension; ++i) header.push_back(embedding_column(i));
    std::map<SiteYear, const EmbeddingVector*> rows;
    for (const auto& s : sites)
        for (const auto& [y, v] : s.embeddings) rows.emplace(SiteYear{s.site_id, y}, &v);
    for (const auto& p : points)
        for (const auto& [y, v] : p.embeddings) rows.emplace(SiteYear{p.point_id, y}, &v);
    csv::Writer out(header);
    std::vector<std::string> fields;
    for (const auto& [key, vec] : rows) {
        fields.assign({key.first, std::to_string(key.second)});
        for (double x : vec->values()) fields.push_back(csv::format_double(x));
        out.row(fields);
    }
    out.save(path);
}

inline void write_sites(const std::filesystem::path& dir, const std::vector<SiteRecord>& sites) {
    csv::Writer meta({"site_id", "lon", "lat", "area_ha", "start_year", "strategy", "start_lulc"});
    csv::Writer spectral({"id", "year", "ndvi", "evi"});
    std::vector<std::string> cov_header{"id", "year"};
    for (auto c : kCovariateColumns) cov_header.emplace_back(c);
    csv::Writer covariates(cov_header);

    auto sorted = sites;
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.site_id < b.site_id; });
    for (const auto& s : sorted) {
        meta.row({s.site_id, csv::format_double(s.lon), csv::format_double(s.lat), csv::format_double(s.area_ha),
                  std::to_string(s.start_year), std::string(label(s.strategy)),
                  s.start_lulc ? s.start_lulc->name() : std::string{}});
        for (const auto& [y, v] : s.spectral) {
            spectral.row({s.site_id, std::to_string(y), csv::format_double(v.ndvi), csv::format_double(v.evi)});
        }
        for (const auto& [y, c] : s.covariates) {
            std::vector<std::string> row{s.site_id, std::to_string(y)};
            for (double x : c.as_array()) row.push_back(csv::format_double(x));
            covariates.row(row);
        }
    }
    meta.save(dir / "sites.csv");
    spectral.save(dir / "spectral.csv");
    covariates.save(dir / "covariates.csv");
}

inline void write_lulc_codes(const std::filesystem::path& path, const LulcCodeTable& codes) {
    csv::Writer out({"code", "name"});
    for (const auto& [code, cls] : codes.entries()) out.row({std::to_string(code), cls.name()});
    out.save(path);
}

inline void write_reference_points(const std::filesystem::path& path, const std::vector<ReferencePoint>& points,
                                   const LulcCodeTable& codes, const YearWindow& lulc_years) {
    std::vector<std::string> header{"point_id", "lon", "lat"};
    for (int y = lulc_years.first; y <= lulc_years.last; ++y) header.push_back(lulc_column(y));
    csv::Writer out(header);
    auto sorted = points;
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.point_id < b.point_id; });
    for (const auto& p : sorted) {
        std::vector<std::string> row{p.point_id, csv::format_double(p.lon), csv::format_double(p.lat)};
        for (int y = lulc_years.first; y <= lulc_years.last; ++y) {
            const auto it = p.lulc_series.find(y);
            if (it == p.lulc_series.end()) {
                throw Error(ErrorCode::InsufficientSeries, p.point_id + " has no label for " + std::to_string(y));
            }
            const auto code = codes.code_of(it->second);
            if (!code) {
                throw Error(ErrorCode::UnknownClass, "no code for class " + it->second.name());
            }
            row.push_back(std::to_string(*code));
        }
        out.row(row);
    }
    out.save(path);
}

}  // namespace reftraj
