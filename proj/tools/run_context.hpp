#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "reftraj/csv.hpp"
#include "reftraj/error.hpp"
#include "reftraj/hash.hpp"

namespace reftraj::cli {

/// Tracks the files one run writes so they can be listed in the manifest, or
/// removed again if the run fails part way.
class RunContext {
public:
    explicit RunContext(std::filesystem::path output_dir) : dir_(std::move(output_dir)) {
        std::filesystem::create_directories(dir_);
    }

    const std::filesystem::path& dir() const { return dir_; }

    void save(const std::string& name, const csv::Writer& table) {
        const auto path = dir_ / name;
        record(path);
        table.save(path);
    }

    /// Registers a file written by other code (e.g. the synthetic world writer).
    void record(const std::filesystem::path& path) {
        if (std::find(artifacts_.begin(), artifacts_.end(), path) == artifacts_.end()) {
            artifacts_.push_back(path);
        }
    }

    void add_input(const std::filesystem::path& path) {
        if (path.empty()) return;
        if (!std::filesystem::exists(path)) {
            throw Error(ErrorCode::IoError, "input does not exist: " + path.string());
        }
        inputs_.push_back(path);
    }

    void note(std::string message) { notes_.push_back(std::move(message)); }

    /// manifest.json: command, config and its hash, seed, input and artifact
    /// checksums. Paths are reduced to file names so identical runs into
    /// different directories produce identical manifests.
    void write_manifest(const std::string& command, const nlohmann::json& config) const {
        nlohmann::json m;
        m["command"] = command;
        m["config"] = config;
        m["config_hash"] = Fnv1a{}.text(config.dump()).hex();
        m["seed"] = config.contains("seed") ? config["seed"] : nlohmann::json(nullptr);
        m["inputs"] = nlohmann::json::array();
        for (const auto& p : inputs_) {
            m["inputs"].push_back({{"file", p.filename().string()}, {"checksum", file_checksum(p)}});
        }
        m["artifacts"] = nlohmann::json::array();
        auto sorted = artifacts_;
        std::sort(sorted.begin(), sorted.end());
        for (const auto& p : sorted) {
            m["artifacts"].push_back({{"file", p.filename().string()}, {"checksum", file_checksum(p)}});
        }
        m["notes"] = notes_;
        std::ofstream out(dir_ / "manifest.json", std::ios::binary | std::ios::trunc);
        out << m.dump(2) << '\n';
    }

    void remove_outputs() const {
        std::error_code ec;
        for (const auto& p : artifacts_) std::filesystem::remove(p, ec);
        std::filesystem::remove(dir_ / "manifest.json", ec);
    }

private:
    std::filesystem::path dir_;
    std::vector<std::filesystem::path> artifacts_;
    std::vector<std::filesystem::path> inputs_;
    std::vector<std::string> notes_;
};

}  // namespace reftraj::cli
