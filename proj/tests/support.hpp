#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "reftraj/core.hpp"
#include "reftraj/rng.hpp"

namespace testing_support {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("reftraj_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::vector<double> unit(std::size_t dim, std::size_t axis, double scale = 1.0) {
    std::vector<double> v(dim, 0.0);
    v[axis] = scale;
    return v;
}

inline reftraj::EmbeddingVector vec(std::vector<double> v) { return reftraj::EmbeddingVector(std::move(v)); }

inline std::vector<double> gaussian(std::size_t dim, reftraj::Rng& rng) {
    std::vector<double> v(dim);
    for (auto& x : v) x = rng.normal();
    return v;
}

/// Stable point with the same embedding in every year of `years`.
inline reftraj::ReferencePoint stable_point(const std::string& id, reftraj::LulcClass cls, std::vector<double> e,
                                            double lon = 0.0, double lat = 0.0, int first = 2015, int last = 2024) {
    reftraj::ReferencePoint p;
    p.point_id = id;
    p.lon = lon;
    p.lat = lat;
    for (int y = first; y <= last; ++y) p.lulc_series.emplace(y, cls);
    for (int y = 2017; y <= 2024; ++y) p.embeddings.emplace(y, reftraj::EmbeddingVector(e));
    p.stability = reftraj::Stability::stable(cls);
    return p;
}

}  // namespace testing_support
