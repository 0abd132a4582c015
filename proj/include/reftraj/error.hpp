#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace reftraj {

enum class ErrorCode : std::uint8_t {
    WrongDimension,
    NonFinite,
    ZeroVector,
    InvalidValue,
    InvalidArgument,
    ParseError,
    MissingColumn,
    MissingYearColumn,
    MissingMetadataField,
    DuplicateKey,
    UnknownStrategy,
    UnknownClass,
    IoError,
    InsufficientSeries,
    NoSecondaryForestPoints,
    NoCentroidForClass,
    MissingBaselineClass,
    NoEmbeddings,
    TooFewCentroids,
    DegenerateData,
    SingleCluster,
    TooFewPoints,
    MissingFeature,
    SingularSystem,
    SingleClass,
    SeparationInfeasible,
};

constexpr std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::WrongDimension: return "WrongDimension";
        case ErrorCode::NonFinite: return "NonFinite";
        case ErrorCode::ZeroVector: return "ZeroVector";
        case ErrorCode::InvalidValue: return "InvalidValue";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::ParseError: return "ParseError";
        case ErrorCode::MissingColumn: return "MissingColumn";
        case ErrorCode::MissingYearColumn: return "MissingYearColumn";
        case ErrorCode::MissingMetadataField: return "MissingMetadataField";
        case ErrorCode::DuplicateKey: return "DuplicateKey";
        case ErrorCode::UnknownStrategy: return "UnknownStrategy";
        case ErrorCode::UnknownClass: return "UnknownClass";
        case ErrorCode::IoError: return "IoError";
        case ErrorCode::InsufficientSeries: return "InsufficientSeries";
        case ErrorCode::NoSecondaryForestPoints: return "NoSecondaryForestPoints";
        case ErrorCode::NoCentroidForClass: return "NoCentroidForClass";
        case ErrorCode::MissingBaselineClass: return "MissingBaselineClass";
        case ErrorCode::NoEmbeddings: return "NoEmbeddings";
        case ErrorCode::TooFewCentroids: return "TooFewCentroids";
        case ErrorCode::DegenerateData: return "DegenerateData";
        case ErrorCode::SingleCluster: return "SingleCluster";
        case ErrorCode::TooFewPoints: return "TooFewPoints";
        case ErrorCode::MissingFeature: return "MissingFeature";
        case ErrorCode::SingularSystem: return "SingularSystem";
        case ErrorCode::SingleClass: return "SingleClass";
        case ErrorCode::SeparationInfeasible: return "SeparationInfeasible";
    }
    return "Unknown";
}

/// Every module reports failures through this exception. `line()` is set for
/// errors that originate in a specific input row (1-based, header is line 1).
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message, std::size_t line = 0)
        : std::runtime_error(format(code, message, line)), code_(code), line_(line), detail_(message) {}

    ErrorCode code() const noexcept { return code_; }
    std::size_t line() const noexcept { return line_; }
    const std::string& detail() const noexcept { return detail_; }

private:
    static std::string format(ErrorCode code, const std::string& message, std::size_t line) {
        std::string out(to_string(code));
        if (line > 0) {
            out += " (line " + std::to_string(line) + ")";
        }
        out += ": ";
        out += message;
        return out;
    }

    ErrorCode code_;
    std::size_t line_;
    std::string detail_;
};

}  // namespace reftraj
