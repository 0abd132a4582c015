#pragma once

#include <cmath>
#include <set>
#include <span>

#include "reftraj/error.hpp"

namespace reftraj {

namespace detail {
inline void check_lengths(std::size_t a, std::size_t b) {
    if (a != b || a == 0) throw Error(ErrorCode::InvalidArgument, "metric inputs must be non-empty and equal length");
}
}  // namespace detail

/// 1 - SSE/SST against the mean of `truth`. A constant `truth` gives 1 for an
/// exact fit and 0 otherwise.
inline double r_squared(std::span<const double> truth, std::span<const double> predicted) {
    detail::check_lengths(truth.size(), predicted.size());
    double mean = 0.0;
    for (double v : truth) mean += v;
    mean /= static_cast<double>(truth.size());
    double sse = 0.0;
    double sst = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        sse += (truth[i] - predicted[i]) * (truth[i] - predicted[i]);
        sst += (truth[i] - mean) * (truth[i] - mean);
    }
    if (sst == 0.0) return sse == 0.0 ? 1.0 : 0.0;
    return 1.0 - sse / sst;
}

inline double mean_absolute_error(std::span<const double> truth, std::span<const double> predicted) {
    detail::check_lengths(truth.size(), predicted.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) sum += std::abs(truth[i] - predicted[i]);
    return sum / static_cast<double>(truth.size());
}

inline double accuracy(std::span<const int> truth, std::span<const int> predicted) {
    detail::check_lengths(truth.size(), predicted.size());
    std::size_t hits = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) hits += truth[i] == predicted[i] ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(truth.size());
}

/// Unweighted mean of per-class F1 over every class seen in truth or
/// predictions; a class never predicted correctly contributes 0.
inline double macro_f1(std::span<const int> truth, std::span<const int> predicted) {
    detail::check_lengths(truth.size(), predicted.size());
    std::set<int> classes(truth.begin(), truth.end());
    classes.insert(predicted.begin(), predicted.end());
    double total = 0.0;
    for (int c : classes) {
        std::size_t tp = 0;
        std::size_t fp = 0;
        std::size_t fn = 0;
        for (std::size_t i = 0; i < truth.size(); ++i) {
            if (predicted[i] == c && truth[i] == c) ++tp;
            else if (predicted[i] == c) ++fp;
            else if (truth[i] == c) ++fn;
        }
        if (tp > 0) total += 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
    }
    return total / static_cast<double>(classes.size());
}

}  // namespace reftraj
