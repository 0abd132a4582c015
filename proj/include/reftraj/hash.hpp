#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <string_view>

#include "reftraj/error.hpp"

namespace reftraj {

/// 64-bit FNV-1a, used for manifests and model fingerprints (not security).
class Fnv1a {
public:
    Fnv1a& bytes(const void* data, std::size_t size) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < size; ++i) {
            state_ ^= p[i];
            state_ *= 0x100000001B3ULL;
        }
        return *this;
    }
    Fnv1a& text(std::string_view s) { return bytes(s.data(), s.size()); }
    Fnv1a& number(double x) {
        const auto bits = std::bit_cast<std::uint64_t>(x);
        return bytes(&bits, sizeof(bits));
    }
    Fnv1a& number(std::int64_t x) { return bytes(&x, sizeof(x)); }
    Fnv1a& numbers(std::span<const double> xs) {
        for (double x : xs) number(x);
        return *this;
    }

    std::uint64_t value() const { return state_; }
    std::string hex() const {
        char buf[17];
        std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(state_));
        return buf;
    }

private:
    std::uint64_t state_ = 0xCBF29CE484222325ULL;
};

inline std::string file_checksum(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
    Fnv1a h;
    char buffer[1 << 16];
    while (in) {
        in.read(buffer, sizeof(buffer));
        h.bytes(buffer, static_cast<std::size_t>(in.gcount()));
    }
    return h.hex();
}

}  // namespace reftraj
