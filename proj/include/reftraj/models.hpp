#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "reftraj/error.hpp"
#include "reftraj/hash.hpp"
#include "reftraj/parallel.hpp"
#include "reftraj/rng.hpp"

namespace reftraj {

/// Dense row-major design matrix.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Matrix from_rows(const std::vector<std::vector<double>>& rows) {
        Matrix m(rows.size(), rows.empty() ? 0 : rows.front().size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (rows[i].size() != m.cols_) throw Error(ErrorCode::WrongDimension, "ragged feature rows");
            std::copy(rows[i].begin(), rows[i].end(), m.data_.begin() + static_cast<std::ptrdiff_t>(i * m.cols_));
        }
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
    std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }
    std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }

    void append_row(std::span<const double> values) {
        if (rows_ == 0 && cols_ == 0) cols_ = values.size();
        if (values.size() != cols_) throw Error(ErrorCode::WrongDimension, "row width mismatch");
        data_.insert(data_.end(), values.begin(), values.end());
        ++rows_;
    }

    Eigen::MatrixXd to_eigen() const {
        Eigen::MatrixXd m(static_cast<Eigen::Index>(rows_), static_cast<Eigen::Index>(cols_));
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < cols_; ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = (*this)(i, j);
        return m;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

namespace detail {

inline void check_finite(const Matrix& x) {
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (double v : x.row(i))
            if (!std::isfinite(v)) throw Error(ErrorCode::NonFinite, "feature matrix contains NaN/Inf");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Ridge regression

struct LinearModel {
    std::vector<double> weights;
    double intercept = 0.0;

    double predict(std::span<const double> x) const {
        double y = intercept;
        for (std::size_t j = 0; j < weights.size(); ++j) y += weights[j] * x[j];
        return y;
    }

    std::uint64_t fingerprint() const { return Fnv1a{}.numbers(weights).number(intercept).value(); }
};

/// Ridge least squares with an unpenalized intercept: the normal equations
/// (Xc'Xc + λI) w = Xc'yc on centered data.
inline LinearModel train_linear(const Matrix& x, std::span<const double> y, double ridge_lambda = 1e-6) {
    if (x.rows() == 0 || x.rows() != y.size()) {
        throw Error(ErrorCode::InvalidArgument, "linear model needs n >= 1 rows matching the targets");
    }
    detail::check_finite(x);
    for (double v : y)
        if (!std::isfinite(v)) throw Error(ErrorCode::NonFinite, "target contains NaN/Inf");
    if (ridge_lambda < 0) throw Error(ErrorCode::InvalidArgument, "ridge lambda must be >= 0");

    const auto n = static_cast<Eigen::Index>(x.rows());
    const auto p = static_cast<Eigen::Index>(x.cols());
    Eigen::MatrixXd xc = x.to_eigen();
    const Eigen::RowVectorXd x_mean = xc.colwise().mean();
    xc.rowwise() -= x_mean;
    const Eigen::VectorXd yv = Eigen::Map<const Eigen::VectorXd>(y.data(), n);
    const double y_mean = yv.mean();

    LinearModel model;
    if (p == 0) {
        model.intercept = y_mean;
        return model;
    }
    Eigen::MatrixXd a = xc.transpose() * xc;
    a.diagonal().array() += ridge_lambda;
    const Eigen::VectorXd b = xc.transpose() * (yv.array() - y_mean).matrix();
    Eigen::VectorXd w;
    if (ridge_lambda == 0.0) {
        const Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
        if (lu.rank() < p) throw Error(ErrorCode::SingularSystem, "collinear design with lambda = 0");
        w = lu.solve(b);
    } else {
        const Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
        if (ldlt.info() != Eigen::Success) throw Error(ErrorCode::SingularSystem, "normal equations not solvable");
        w = ldlt.solve(b);
    }
    model.weights.assign(w.data(), w.data() + p);
    model.intercept = y_mean - x_mean.dot(w);
    return model;
}

// ---------------------------------------------------------------------------
// Multinomial logistic regression

struct LogisticOptions {
    double l2 = 1e-4;
    /// Step = step_scale / L, with L a bound on the loss curvature estimated
    /// by power iteration; the step decays as 1 / (1 + decay * epoch).
    double step_scale = 1.0;
    double decay = 0.0;
    int max_epochs = 500;
    double tolerance = 1e-6;  ///< stop when max |gradient| falls below
    std::uint64_t seed = 0;
};

struct LogisticModel {
    std::vector<int> classes;  ///< sorted distinct training labels
    std::vector<double> mean;
    std::vector<double> scale;
    Eigen::MatrixXd weights;  ///< classes x (features + 1); last column is the bias
    int epochs = 0;

    std::vector<double> predict_proba(std::span<const double> x) const {
        const auto p = static_cast<Eigen::Index>(mean.size());
        Eigen::VectorXd z(p + 1);
        for (Eigen::Index j = 0; j < p; ++j) z(j) = (x[static_cast<std::size_t>(j)] - mean[static_cast<std::size_t>(j)]) / scale[static_cast<std::size_t>(j)];
        z(p) = 1.0;
        Eigen::VectorXd logits = weights * z;
        logits.array() -= logits.maxCoeff();
        logits = logits.array().exp();
        logits /= logits.sum();
        return {logits.data(), logits.data() + logits.size()};
    }

    int predict(std::span<const double> x) const {
        const auto proba = predict_proba(x);
        const auto best = std::max_element(proba.begin(), proba.end()) - proba.begin();
        return classes[static_cast<std::size_t>(best)];
    }

    std::uint64_t fingerprint() const {
        Fnv1a h;
        h.numbers(mean).numbers(scale);
        h.numbers(std::span<const double>(weights.data(), static_cast<std::size_t>(weights.size())));
        for (int c : classes) h.number(static_cast<std::int64_t>(c));
        return h.value();
    }
};

/// Full-batch gradient descent on the L2-penalized softmax cross-entropy.
/// Features are standardized with training statistics (zero-variance
/// columns keep scale 1).
inline LogisticModel train_logistic(const Matrix& x, std::span<const int> labels, const LogisticOptions& options = {}) {
    if (x.rows() == 0 || x.rows() != labels.size()) {
        throw Error(ErrorCode::InvalidArgument, "logistic model needs rows matching the labels");
    }
    detail::check_finite(x);
    LogisticModel model;
    model.classes.assign(labels.begin(), labels.end());
    std::sort(model.classes.begin(), model.classes.end());
    model.classes.erase(std::unique(model.classes.begin(), model.classes.end()), model.classes.end());
    if (model.classes.size() < 2) {
        throw Error(ErrorCode::SingleClass, "logistic regression needs at least two classes");
    }

    const auto n = static_cast<Eigen::Index>(x.rows());
    const auto p = static_cast<Eigen::Index>(x.cols());
    const auto k = static_cast<Eigen::Index>(model.classes.size());
    Eigen::MatrixXd z(n, p + 1);
    model.mean.assign(static_cast<std::size_t>(p), 0.0);
    model.scale.assign(static_cast<std::size_t>(p), 1.0);
    for (Eigen::Index j = 0; j < p; ++j) {
        double sum = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) sum += x(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
        const double mu = sum / static_cast<double>(n);
        double ss = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double d = x(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) - mu;
            ss += d * d;
        }
        const double sd = std::sqrt(ss / static_cast<double>(n));
        model.mean[static_cast<std::size_t>(j)] = mu;
        model.scale[static_cast<std::size_t>(j)] = sd > 0.0 ? sd : 1.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            z(i, j) = (x(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) - mu) / model.scale[static_cast<std::size_t>(j)];
        }
    }
    z.col(p).setOnes();

    Eigen::MatrixXd onehot = Eigen::MatrixXd::Zero(n, k);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto pos = std::lower_bound(model.classes.begin(), model.classes.end(), labels[static_cast<std::size_t>(i)]) -
                         model.classes.begin();
        onehot(i, pos) = 1.0;
    }

    Rng rng(options.seed);
    // Curvature bound: softmax Hessian <= 0.5 * Z'Z / n (+ l2), top eigenvalue by power iteration.
    const Eigen::MatrixXd gram = (z.transpose() * z) / static_cast<double>(n);
    Eigen::VectorXd v(p + 1);
    for (Eigen::Index j = 0; j <= p; ++j) v(j) = 1.0 + 0.01 * rng.normal();
    double lambda_max = 1.0;
    for (int it = 0; it < 100; ++it) {
        Eigen::VectorXd next = gram * v;
        const double len = next.norm();
        if (len == 0.0) break;
        lambda_max = len / v.norm();
        v = next / len;
    }
    const double curvature = 0.5 * lambda_max * 1.05 + options.l2;

    model.weights.resize(k, p + 1);
    for (Eigen::Index c = 0; c < k; ++c)
        for (Eigen::Index j = 0; j <= p; ++j) model.weights(c, j) = 0.01 * rng.normal();

    Eigen::MatrixXd penalty_mask = Eigen::MatrixXd::Ones(k, p + 1);
    penalty_mask.col(p).setZero();
    for (int epoch = 0; epoch < options.max_epochs; ++epoch) {
        Eigen::MatrixXd logits = z * model.weights.transpose();
        for (Eigen::Index i = 0; i < n; ++i) {
            const double m = logits.row(i).maxCoeff();
            logits.row(i) = (logits.row(i).array() - m).exp();
            logits.row(i) /= logits.row(i).sum();
        }
        const Eigen::MatrixXd grad = (logits - onehot).transpose() * z / static_cast<double>(n) +
                                     options.l2 * model.weights.cwiseProduct(penalty_mask);
        model.epochs = epoch + 1;
        if (grad.cwiseAbs().maxCoeff() < options.tolerance) break;
        const double step = options.step_scale / curvature / (1.0 + options.decay * epoch);
        model.weights -= step * grad;
    }
    return model;
}

// ---------------------------------------------------------------------------
// Random forest

enum class ForestMode { Regression, Classification };

struct ForestOptions {
    std::size_t n_trees = 100;
    ForestMode mode = ForestMode::Regression;
    std::uint64_t seed = 0;
    std::optional<std::size_t> max_depth;  ///< unbounded when empty
    std::size_t min_leaf = 1;
    std::optional<std::size_t> mtry;  ///< default: floor(sqrt(p)) classification, ceil(p/3) regression
    bool bootstrap = true;
    std::size_t threads = 1;
};

struct TreeNode {
    int feature = -1;  ///< -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;  ///< leaf mean (regression) or class index (classification)
};

struct DecisionTree {
    std::vector<TreeNode> nodes;

    double predict(std::span<const double> x) const {
        int i = 0;
        while (nodes[static_cast<std::size_t>(i)].feature >= 0) {
            const auto& node = nodes[static_cast<std::size_t>(i)];
            i = x[static_cast<std::size_t>(node.feature)] <= node.threshold ? node.left : node.right;
        }
        return nodes[static_cast<std::size_t>(i)].value;
    }
};

namespace detail {

/// CART growth over one (bootstrap) sample. Targets are real values for
/// regression and class indices 0..n_classes-1 for classification.
class TreeBuilder {
public:
    TreeBuilder(const Matrix& x, std::span<const double> y, const ForestOptions& options, std::size_t n_classes,
                std::size_t mtry, Rng& rng)
        : x_(x), y_(y), options_(options), n_classes_(n_classes), mtry_(mtry), rng_(rng) {}

    DecisionTree build(std::vector<std::size_t> sample) {
        tree_.nodes.clear();
        grow(sample, 0);
        return std::move(tree_);
    }

private:
    struct Split {
        int feature = -1;
        double threshold = 0.0;
        double gain = 0.0;
    };

    bool classification() const { return options_.mode == ForestMode::Classification; }

    /// Total impurity: SSE for regression, n * Gini for classification.
    double impurity(std::span<const std::size_t> idx, double* leaf_value) const {
        const auto n = static_cast<double>(idx.size());
        if (classification()) {
            std::vector<std::size_t> counts(n_classes_, 0);
            for (auto i : idx) ++counts[static_cast<std::size_t>(y_[i])];
            double sq = 0.0;
            for (auto c : counts) sq += static_cast<double>(c) * static_cast<double>(c);
            // majority, ties to the smallest class index
            *leaf_value = static_cast<double>(std::max_element(counts.begin(), counts.end()) - counts.begin());
            return n - sq / n;
        }
        double sum = 0.0;
        for (auto i : idx) sum += y_[i];
        const double mean = sum / n;
        double sse = 0.0;
        for (auto i : idx) sse += (y_[i] - mean) * (y_[i] - mean);
        *leaf_value = mean;
        return sse;
    }

    Split best_split_on(int feature, std::vector<std::size_t>& idx, double parent) const {
        const auto f = static_cast<std::size_t>(feature);
        std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
            const double va = x_(a, f);
            const double vb = x_(b, f);
            return va != vb ? va < vb : a < b;
        });
        const std::size_t n = idx.size();
        Split best;
        best.feature = feature;
        if (classification()) {
            std::vector<double> left(n_classes_, 0.0);
            std::vector<double> right(n_classes_, 0.0);
            for (auto i : idx) right[static_cast<std::size_t>(y_[i])] += 1.0;
            double left_sq = 0.0;
            double right_sq = 0.0;
            for (double c : right) right_sq += c * c;
            for (std::size_t pos = 0; pos + 1 < n; ++pos) {
                const auto c = static_cast<std::size_t>(y_[idx[pos]]);
                left_sq += 2.0 * left[c] + 1.0;
                left[c] += 1.0;
                right_sq -= 2.0 * right[c] - 1.0;
                right[c] -= 1.0;
                const double nl = static_cast<double>(pos + 1);
                const double nr = static_cast<double>(n - pos - 1);
                if (pos + 1 < options_.min_leaf || n - pos - 1 < options_.min_leaf) continue;
                const double a = x_(idx[pos], f);
                const double b = x_(idx[pos + 1], f);
                if (!(a < b)) continue;
                const double child = (nl - left_sq / nl) + (nr - right_sq / nr);
                const double gain = parent - child;
                if (gain > best.gain) {
                    best.gain = gain;
                    best.threshold = midpoint(a, b);
                }
            }
        } else {
            double mean = 0.0;
            for (auto i : idx) mean += y_[i];
            mean /= static_cast<double>(n);
            double total = 0.0;
            for (auto i : idx) total += y_[i] - mean;
            const double n_all = static_cast<double>(n);
            // With centered targets, SSE(parent) - SSE(children) = S_l^2/n_l + S_r^2/n_r - S^2/n.
            const double base = total * total / n_all;
            double left_sum = 0.0;
            for (std::size_t pos = 0; pos + 1 < n; ++pos) {
                left_sum += y_[idx[pos]] - mean;
                if (pos + 1 < options_.min_leaf || n - pos - 1 < options_.min_leaf) continue;
                const double a = x_(idx[pos], f);
                const double b = x_(idx[pos + 1], f);
                if (!(a < b)) continue;
                const double nl = static_cast<double>(pos + 1);
                const double nr = n_all - nl;
                const double right_sum = total - left_sum;
                const double gain = left_sum * left_sum / nl + right_sum * right_sum / nr - base;
                if (gain > best.gain) {
                    best.gain = gain;
                    best.threshold = midpoint(a, b);
                }
            }
        }
        // Gains below rounding noise of the parent impurity are not splits.
        if (best.gain <= parent * 1e-12) best.gain = 0.0;
        return best;
    }

    static double midpoint(double a, double b) {
        const double m = a + (b - a) / 2.0;
        return (m < b) ? m : a;
    }

    int grow(std::vector<std::size_t>& idx, std::size_t depth) {
        const int id = static_cast<int>(tree_.nodes.size());
        tree_.nodes.emplace_back();
        double leaf_value = 0.0;
        const double parent = impurity(idx, &leaf_value);
        tree_.nodes[static_cast<std::size_t>(id)].value = leaf_value;
        const bool depth_limited = options_.max_depth && depth >= *options_.max_depth;
        if (parent <= 0.0 || idx.size() < 2 * options_.min_leaf || depth_limited) return id;

        const std::size_t p = x_.cols();
        std::vector<std::size_t> order(p);
        std::iota(order.begin(), order.end(), 0);
        Split best;
        std::vector<std::size_t> scratch = idx;
        for (std::size_t tried = 0; tried < p; ++tried) {
            // partial Fisher-Yates: draw the next feature without replacement
            const std::size_t j = tried + static_cast<std::size_t>(rng_.below(p - tried));
            std::swap(order[tried], order[j]);
            const auto candidate = best_split_on(static_cast<int>(order[tried]), scratch, parent);
            if (candidate.gain > best.gain) best = candidate;
            // beyond mtry, keep drawing only until some valid split exists
            if (tried + 1 >= mtry_ && best.gain > 0.0) break;
        }
        if (best.gain <= 0.0) return id;

        const auto f = static_cast<std::size_t>(best.feature);
        std::vector<std::size_t> left;
        std::vector<std::size_t> right;
        for (auto i : idx) (x_(i, f) <= best.threshold ? left : right).push_back(i);
        idx.clear();
        idx.shrink_to_fit();
        const int l = grow(left, depth + 1);
        const int r = grow(right, depth + 1);
        auto& node = tree_.nodes[static_cast<std::size_t>(id)];
        node.feature = best.feature;
        node.threshold = best.threshold;
        node.left = l;
        node.right = r;
        return id;
    }

    const Matrix& x_;
    std::span<const double> y_;
    const ForestOptions& options_;
    std::size_t n_classes_;
    std::size_t mtry_;
    Rng& rng_;
    DecisionTree tree_;
};

}  // namespace detail

struct RandomForest {
    ForestMode mode = ForestMode::Regression;
    std::size_t n_classes = 0;
    std::vector<DecisionTree> trees;

    /// Mean over trees (regression) or majority vote with ties to the smallest
    /// class index (classification).
    double predict(std::span<const double> x) const {
        if (mode == ForestMode::Regression) {
            double sum = 0.0;
            for (const auto& t : trees) sum += t.predict(x);
            return sum / static_cast<double>(trees.size());
        }
        std::vector<std::size_t> votes(n_classes, 0);
        for (const auto& t : trees) ++votes[static_cast<std::size_t>(t.predict(x))];
        return static_cast<double>(std::max_element(votes.begin(), votes.end()) - votes.begin());
    }

    std::uint64_t fingerprint() const {
        Fnv1a h;
        for (const auto& t : trees) {
            for (const auto& node : t.nodes) {
                h.number(static_cast<std::int64_t>(node.feature)).number(node.threshold).number(node.value);
            }
        }
        return h.value();
    }
};

/// Trees are grown on bootstrap samples with per-tree seeds derived from
/// (seed, tree index), so results do not depend on the thread count.
/// Classification targets must be class indices 0..K-1.
inline RandomForest train_random_forest(const Matrix& x, std::span<const double> y, const ForestOptions& options = {}) {
    if (x.rows() < 2 || x.rows() != y.size()) {
        throw Error(ErrorCode::InvalidArgument, "random forest needs n >= 2 rows matching the targets");
    }
    if (options.n_trees == 0) throw Error(ErrorCode::InvalidArgument, "random forest needs at least one tree");
    if (options.min_leaf == 0) throw Error(ErrorCode::InvalidArgument, "min_leaf must be >= 1");
    detail::check_finite(x);
    RandomForest forest;
    forest.mode = options.mode;
    if (options.mode == ForestMode::Classification) {
        for (double v : y) {
            if (v < 0 || v != std::floor(v)) throw Error(ErrorCode::InvalidArgument, "class labels must be indices >= 0");
            forest.n_classes = std::max(forest.n_classes, static_cast<std::size_t>(v) + 1);
        }
    } else {
        for (double v : y)
            if (!std::isfinite(v)) throw Error(ErrorCode::NonFinite, "target contains NaN/Inf");
    }
    const std::size_t p = x.cols();
    std::size_t mtry = options.mtry.value_or(
        options.mode == ForestMode::Classification
            ? static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(p))))
            : (p + 2) / 3);
    mtry = std::clamp<std::size_t>(mtry, 1, std::max<std::size_t>(p, 1));

    forest.trees.resize(options.n_trees);
    parallel_for(options.n_trees, options.threads, [&](std::size_t t) {
        Rng rng(mix_seed(options.seed, t));
        std::vector<std::size_t> sample(x.rows());
        if (options.bootstrap) {
            for (auto& s : sample) s = static_cast<std::size_t>(rng.below(x.rows()));
        } else {
            std::iota(sample.begin(), sample.end(), 0);
        }
        detail::TreeBuilder builder(x, y, options, forest.n_classes, mtry, rng);
        forest.trees[t] = builder.build(std::move(sample));
    });
    return forest;
}

}  // namespace reftraj
