#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "reftraj/core.hpp"

namespace reftraj {

/// Two-component principal-axis projection.
struct ProjectionModel {
    EmbeddingVector mean;
    std::array<std::vector<double>, 2> components;  ///< orthonormal, largest variance first
    std::array<double, 2> explained_variance{};   ///< non-increasing
    double total_variance = 0.0;

    std::size_t dimension() const { return mean.size(); }
};

struct Point2 {
    double x = 0.0;
    double y = 0.0;
};

/// Top-2 eigenvectors of the sample covariance (n - 1 denominator). Each
/// component's largest-magnitude entry is made positive so the fit is unique.
inline ProjectionModel fit_projection(std::span<const EmbeddingVector> embeddings) {
    if (embeddings.size() < 3) {
        throw Error(ErrorCode::TooFewPoints, "projection needs at least 3 vectors");
    }
    const std::size_t dim = embeddings.front().size();
    if (dim < 2) {
        throw Error(ErrorCode::WrongDimension, "projection needs dimension >= 2");
    }
    for (const auto& e : embeddings) {
        if (e.size() != dim) throw Error(ErrorCode::WrongDimension, "mixed dimensions in projection input");
    }
    const bool identical = std::all_of(embeddings.begin(), embeddings.end(),
                                       [&](const EmbeddingVector& e) { return e == embeddings.front(); });
    if (identical) {
        throw Error(ErrorCode::DegenerateData, "all projection inputs are identical");
    }

    const auto n = static_cast<Eigen::Index>(embeddings.size());
    const auto d = static_cast<Eigen::Index>(dim);
    Eigen::MatrixXd data(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < d; ++j) data(i, j) = embeddings[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
    const Eigen::RowVectorXd mean = data.colwise().mean();
    data.rowwise() -= mean;
    const Eigen::MatrixXd cov = (data.transpose() * data) / static_cast<double>(n - 1);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    if (solver.info() != Eigen::Success) {
        throw Error(ErrorCode::DegenerateData, "covariance eigendecomposition failed");
    }

    ProjectionModel model;
    model.mean = EmbeddingVector(std::vector<double>(mean.data(), mean.data() + d));
    model.total_variance = cov.trace();
    for (int k = 0; k < 2; ++k) {
        const Eigen::Index col = d - 1 - k;
        Eigen::VectorXd v = solver.eigenvectors().col(col).normalized();
        Eigen::Index arg = 0;
        v.cwiseAbs().maxCoeff(&arg);
        if (v(arg) < 0) v = -v;
        model.components[static_cast<std::size_t>(k)].assign(v.data(), v.data() + d);
        model.explained_variance[static_cast<std::size_t>(k)] = std::max(0.0, solver.eigenvalues()(col));
    }
    return model;
}

inline Point2 project(const ProjectionModel& model, const EmbeddingVector& e) {
    if (e.size() != model.dimension()) {
        throw Error(ErrorCode::WrongDimension, "projection input has dimension " + std::to_string(e.size()) +
                                                   ", model expects " + std::to_string(model.dimension()));
    }
    Point2 p;
    for (std::size_t i = 0; i < e.size(); ++i) {
        const double centered = e[i] - model.mean[i];
        p.x += centered * model.components[0][i];
        p.y += centered * model.components[1][i];
    }
    return p;
}

struct PathRow {
    std::string id;
    int year = 0;
    double x = 0.0;
    double y = 0.0;
};

/// Projected per-year coordinates sorted by (id, year). Works for any record
/// type exposing an id and an `embeddings` year map.
template <class Record>
std::vector<PathRow> trajectory_paths_2d(const std::vector<Record>& records, const ProjectionModel& model) {
    std::vector<PathRow> rows;
    for (const auto& r : records) {
        const std::string* id = nullptr;
        if constexpr (requires { r.site_id; }) {
            id = &r.site_id;
        } else {
            id = &r.point_id;
        }
        for (const auto& [year, e] : r.embeddings) {
            const auto p = project(model, e);
            rows.push_back({*id, year, p.x, p.y});
        }
    }
    std::sort(rows.begin(), rows.end(), [](const PathRow& a, const PathRow& b) {
        return a.id != b.id ? a.id < b.id : a.year < b.year;
    });
    return rows;
}

/// Mean silhouette with cosine distance. Singleton clusters score 0.
template <class Label>
double silhouette_score(std::span<const EmbeddingVector> embeddings, std::span<const Label> labels) {
    if (embeddings.size() != labels.size()) {
        throw Error(ErrorCode::InvalidArgument, "embeddings and labels differ in length");
    }
    std::map<Label, int> cluster_of;
    for (const auto& l : labels) cluster_of.emplace(l, 0);
    if (cluster_of.size() < 2) {
        throw Error(ErrorCode::SingleCluster, "silhouette needs at least two labels");
    }
    int next = 0;
    for (auto& [l, idx] : cluster_of) idx = next++;
    const std::size_t k = cluster_of.size();
    const std::size_t n = embeddings.size();

    std::vector<std::vector<double>> unit(n);
    std::vector<int> cluster(n);
    std::vector<std::size_t> sizes(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
        const double len = norm(embeddings[i].values());
        if (len == 0.0) throw Error(ErrorCode::ZeroVector, "silhouette input contains a zero vector");
        unit[i].resize(embeddings[i].size());
        for (std::size_t j = 0; j < unit[i].size(); ++j) unit[i][j] = embeddings[i][j] / len;
        cluster[i] = cluster_of.at(labels[i]);
        ++sizes[static_cast<std::size_t>(cluster[i])];
    }

    std::vector<double> sums(n * k, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double dist = std::max(0.0, 1.0 - std::clamp(dot(unit[i], unit[j]), -1.0, 1.0));
            sums[i * k + static_cast<std::size_t>(cluster[j])] += dist;
            sums[j * k + static_cast<std::size_t>(cluster[i])] += dist;
        }
    }
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto own = static_cast<std::size_t>(cluster[i]);
        if (sizes[own] < 2) continue;
        const double a = sums[i * k + own] / static_cast<double>(sizes[own] - 1);
        double b = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < k; ++c) {
            if (c == own || sizes[c] == 0) continue;
            b = std::min(b, sums[i * k + c] / static_cast<double>(sizes[c]));
        }
        const double denom = std::max(a, b);
        if (denom > 0.0) total += (b - a) / denom;
    }
    return total / static_cast<double>(n);
}

}  // namespace reftraj
