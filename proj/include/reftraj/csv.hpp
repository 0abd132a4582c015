#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <unordered_map>
#include <vector>

#include "reftraj/error.hpp"

namespace reftraj::csv {

/// Splits one CSV record. Supports RFC 4180 double-quoted fields; records may
/// not span lines.
inline std::vector<std::string> split_record(std::string_view line, std::size_t line_no = 0) {
    std::vector<std::string> fields;
    std::string current;
    bool quoted = false;
    bool field_was_quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    current.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                current.push_back(c);
            }
        } else if (c == '"' && current.empty() && !field_was_quoted) {
            quoted = true;
            field_was_quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(current));
            current.clear();
            field_was_quoted = false;
        } else {
            current.push_back(c);
        }
    }
    if (quoted) {
        throw Error(ErrorCode::ParseError, "unterminated quoted field", line_no);
    }
    fields.push_back(std::move(current));
    return fields;
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline double parse_double(std::string_view text, std::size_t line_no, std::string_view column) {
    const auto s = trim(text);
    double value = 0.0;
    const auto* first = s.data();
    const auto* last = s.data() + s.size();
    if (!s.empty() && *first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (s.empty() || ec != std::errc{} || ptr != last) {
        throw Error(ErrorCode::ParseError,
                    "column '" + std::string(column) + "': not a number: '" + std::string(text) + "'",
                    line_no);
    }
    return value;
}

inline long long parse_int(std::string_view text, std::size_t line_no, std::string_view column) {
    const auto s = trim(text);
    long long value = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) {
        throw Error(ErrorCode::ParseError,
                    "column '" + std::string(column) + "': not an integer: '" + std::string(text) + "'",
                    line_no);
    }
    return value;
}

/// Shortest decimal text that parses back to exactly the same double.
inline std::string format_double(double value) {
    char buffer[64];
    const auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
    if (ec != std::errc{}) {
        throw Error(ErrorCode::InvalidValue, "cannot format number");
    }
    return std::string(buffer, ptr);
}

inline std::string escape(std::string_view field) {
    if (field.find_first_of(",\"\n\r") == std::string_view::npos) {
        return std::string(field);
    }
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

/// Header-indexed reader. Rows are delivered with their physical line number.
class Reader {
public:
    explicit Reader(const std::filesystem::path& path) : path_(path), in_(path, std::ios::binary) {
        if (!in_) {
            throw Error(ErrorCode::IoError, "cannot open " + path.string());
        }
        std::string line;
        if (!next_line(line)) {
            throw Error(ErrorCode::MissingColumn, path.string() + ": missing header row", 1);
        }
        if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) {
            line.erase(0, 3);
        }
        header_ = split_record(line, line_no_);
        for (std::size_t i = 0; i < header_.size(); ++i) {
            header_[i] = std::string(trim(header_[i]));
            index_.emplace(header_[i], i);
        }
    }

    const std::vector<std::string>& header() const { return header_; }
    const std::filesystem::path& path() const { return path_; }

    std::optional<std::size_t> find(std::string_view name) const {
        const auto it = index_.find(std::string(name));
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

    std::size_t require(std::string_view name, ErrorCode code = ErrorCode::MissingColumn) const {
        const auto idx = find(name);
        if (!idx) {
            throw Error(code, path_.string() + ": missing column '" + std::string(name) + "'", 1);
        }
        return *idx;
    }

    /// Reads the next non-blank record; returns false at end of file. Rows
    /// longer than the header raise MissingColumn, shorter ones ParseError.
    bool next(std::vector<std::string>& fields) {
        std::string line;
        while (next_line(line)) {
            if (trim(line).empty()) continue;
            fields = split_record(line, line_no_);
            if (fields.size() > header_.size()) {
                throw Error(ErrorCode::MissingColumn,
                            path_.string() + ": row has " + std::to_string(fields.size()) +
                                " fields but header names only " + std::to_string(header_.size()),
                            line_no_);
            }
            if (fields.size() < header_.size()) {
                throw Error(ErrorCode::ParseError,
                            path_.string() + ": row has " + std::to_string(fields.size()) +
                                " fields, expected " + std::to_string(header_.size()),
                            line_no_);
            }
            return true;
        }
        return false;
    }

    std::size_t line() const { return line_no_; }

private:
    bool next_line(std::string& line) {
        if (!std::getline(in_, line)) return false;
        ++line_no_;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return true;
    }

    std::filesystem::path path_;
    std::ifstream in_;
    std::vector<std::string> header_;
    std::unordered_map<std::string, std::size_t> index_;
    std::size_t line_no_ = 0;
};

/// Accumulates a table in memory with `\n` line endings.
class Writer {
public:
    explicit Writer(const std::vector<std::string>& header) { row(header); }

    Writer& row(const std::vector<std::string>& fields) {
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i) out_ << ',';
            out_ << escape(fields[i]);
        }
        out_ << '\n';
        return *this;
    }

    std::string str() const { return out_.str(); }

    void save(const std::filesystem::path& path) const {
        std::ofstream file(path, std::ios::binary | std::ios::trunc);
        if (!file) {
            throw Error(ErrorCode::IoError, "cannot write " + path.string());
        }
        const auto text = out_.str();
        file.write(text.data(), static_cast<std::streamsize>(text.size()));
        if (!file) {
            throw Error(ErrorCode::IoError, "write failed: " + path.string());
        }
    }

private:
    std::ostringstream out_;
};

}  // namespace reftraj::csv
