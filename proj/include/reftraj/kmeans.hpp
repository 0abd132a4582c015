#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "reftraj/error.hpp"
#include "reftraj/rng.hpp"

namespace reftraj {

template <std::size_t N>
using PointN = std::array<double, N>;

template <std::size_t N>
double squared_distance(const PointN<N>& a, const PointN<N>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

template <std::size_t N>
struct KMeansResult {
    std::vector<PointN<N>> centroids;
    std::vector<int> assignment;
    std::vector<double> objective_history;  ///< after every assignment step
    int iterations = 0;
    bool converged = false;

    double objective() const { return objective_history.empty() ? 0.0 : objective_history.back(); }
};

/// Lloyd's algorithm with k-means++ seeding. Stops once no centroid moves by
/// `tol` or more, or after `max_iter` updates. A cluster that empties is
/// reseeded at the point farthest from its current centroid.
template <std::size_t N>
KMeansResult<N> kmeans(std::span<const PointN<N>> points, std::size_t k, std::uint64_t seed, int max_iter = 300,
                       double tol = 1e-6) {
    const std::size_t n = points.size();
    if (k < 1) throw Error(ErrorCode::InvalidArgument, "k must be >= 1");
    if (n < k) {
        throw Error(ErrorCode::TooFewPoints,
                    "k-means with k=" + std::to_string(k) + " needs at least k points, got " + std::to_string(n));
    }
    Rng rng(seed);
    KMeansResult<N> result;
    auto& centroids = result.centroids;

    // k-means++ seeding
    std::vector<bool> chosen(n, false);
    std::size_t first = rng.below(n);
    centroids.push_back(points[first]);
    chosen[first] = true;
    std::vector<double> d2(n);
    for (std::size_t i = 0; i < n; ++i) d2[i] = squared_distance(points[i], centroids[0]);
    while (centroids.size() < k) {
        double total = 0.0;
        for (double v : d2) total += v;
        std::size_t pick = n;
        if (total > 0.0) {
            const double target = rng.uniform() * total;
            double cumulative = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                cumulative += d2[i];
                if (d2[i] > 0.0 && cumulative > target) {
                    pick = i;
                    break;
                }
            }
            if (pick == n) {  // rounding at the tail
                for (std::size_t i = n; i-- > 0;) {
                    if (d2[i] > 0.0) {
                        pick = i;
                        break;
                    }
                }
            }
        } else {
            pick = static_cast<std::size_t>(std::find(chosen.begin(), chosen.end(), false) - chosen.begin());
        }
        chosen[pick] = true;
        centroids.push_back(points[pick]);
        for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], squared_distance(points[i], centroids.back()));
    }

    auto& assignment = result.assignment;
    assignment.assign(n, 0);
    auto assign = [&] {
        double objective = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            int best_c = 0;
            for (std::size_t c = 0; c < k; ++c) {
                const double d = squared_distance(points[i], centroids[c]);
                if (d < best) {
                    best = d;
                    best_c = static_cast<int>(c);
                }
            }
            assignment[i] = best_c;
            objective += best;
        }
        result.objective_history.push_back(objective);
    };

    assign();
    for (int iter = 0; iter < max_iter; ++iter) {
        std::vector<PointN<N>> sums(k, PointN<N>{});
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            const auto c = static_cast<std::size_t>(assignment[i]);
            for (std::size_t j = 0; j < N; ++j) sums[c][j] += points[i][j];
            ++counts[c];
        }
        double shift = 0.0;
        std::vector<bool> taken(n, false);
        for (std::size_t c = 0; c < k; ++c) {
            PointN<N> updated{};
            if (counts[c] > 0) {
                for (std::size_t j = 0; j < N; ++j) updated[j] = sums[c][j] / static_cast<double>(counts[c]);
            } else {
                double far = -1.0;
                std::size_t far_i = 0;
                for (std::size_t i = 0; i < n; ++i) {
                    if (taken[i]) continue;
                    const double d = squared_distance(points[i], centroids[static_cast<std::size_t>(assignment[i])]);
                    if (d > far) {
                        far = d;
                        far_i = i;
                    }
                }
                taken[far_i] = true;
                updated = points[far_i];
            }
            shift = std::max(shift, std::sqrt(squared_distance(updated, centroids[c])));
            centroids[c] = updated;
        }
        assign();
        result.iterations = iter + 1;
        if (shift < tol) {
            result.converged = true;
            break;
        }
    }
    return result;
}

}  // namespace reftraj
