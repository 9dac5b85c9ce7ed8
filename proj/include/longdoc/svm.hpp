#pragma once

// Soft-margin RBF-kernel SVM trained by SMO, combined one-vs-rest.
//
// The binary dual is  min_a  1/2 a'Qa - 1'a,  Q_ij = y_i y_j K(x_i, x_j),
// subject to 0 <= a_i <= C and y'a = 0. Each iteration picks the maximal
// violating pair (first-order working-set selection) and solves the
// two-variable subproblem analytically.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "longdoc/binary_io.hpp"
#include "longdoc/errors.hpp"
#include "longdoc/metrics.hpp"

namespace longdoc {

struct SVMConfig {
    double gamma = 0.0;  // <= 0 selects 1/d at training time
    double C = 1.0;
    double tolerance = 1e-3;
    std::size_t max_passes = 100000;  // SMO iteration bound
};

inline double rbf_kernel(std::span<const double> x, std::span<const double> y, double gamma) {
    if (x.size() != y.size()) throw DataError("rbf_kernel: dimension mismatch");
    double d2 = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double diff = x[k] - y[k];
        d2 += diff * diff;
    }
    return std::exp(-gamma * d2);
}

/// Row-major point set.
struct PointSet {
    std::size_t dim = 0;
    std::vector<double> values;

    std::size_t size() const { return dim ? values.size() / dim : 0; }
    std::span<const double> row(std::size_t i) const { return std::span<const double>(values).subspan(i * dim, dim); }

    void push(std::span<const double> p) {
        if (dim == 0) dim = p.size();
        if (p.size() != dim) throw DataError("point has the wrong dimension");
        values.insert(values.end(), p.begin(), p.end());
    }
};

struct BinarySVM {
    PointSet support;
    std::vector<double> coef;  // alpha_j * y_j
    double bias = 0.0;
    double gamma = 1.0;

    double decision(std::span<const double> x) const {
        if (support.size() && x.size() != support.dim) throw DataError("SVM input has the wrong dimension");
        double f = bias;
        for (std::size_t j = 0; j < coef.size(); ++j) f += coef[j] * rbf_kernel(support.row(j), x, gamma);
        return f;
    }
};

/// Full dual solution, kept for diagnostics and tests.
struct BinarySolution {
    BinarySVM model;
    std::vector<double> alpha;
    double objective = 0.0;  // dual objective 1'a - 1/2 a'Qa
    std::size_t iterations = 0;
    bool converged = false;
};

inline double dual_objective(std::span<const double> alpha, std::span<const int> y, const std::vector<double>& K) {
    const std::size_t n = alpha.size();
    double lin = 0.0, quad = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        lin += alpha[i];
        for (std::size_t j = 0; j < n; ++j) quad += alpha[i] * alpha[j] * y[i] * y[j] * K[i * n + j];
    }
    return lin - 0.5 * quad;
}

inline std::vector<double> kernel_matrix(const PointSet& x, double gamma) {
    const std::size_t n = x.size();
    std::vector<double> K(n * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) K[i * n + j] = K[j * n + i] = rbf_kernel(x.row(i), x.row(j), gamma);
    return K;
}

inline BinarySolution solve_binary_svm(const PointSet& x, std::span<const int> y, const SVMConfig& cfg) {
    const std::size_t n = x.size();
    if (n != y.size()) throw DataError("SVM labels and points differ in count");
    bool pos = false, neg = false;
    for (int v : y) {
        if (v == 1) pos = true;
        else if (v == -1) neg = true;
        else throw DataError("binary SVM labels must be -1 or +1");
    }
    if (!pos || !neg) throw DataError("binary SVM needs both classes");
    if (cfg.C <= 0 || cfg.tolerance <= 0) throw ConfigError("SVM C and tolerance must be positive");
    const double gamma = cfg.gamma > 0 ? cfg.gamma : 1.0 / static_cast<double>(x.dim);
    const double C = cfg.C;
    const auto K = kernel_matrix(x, gamma);
    auto Q = [&](std::size_t i, std::size_t j) { return y[i] * y[j] * K[i * n + j]; };

    std::vector<double> alpha(n, 0.0), G(n, -1.0);  // G = Q a - 1
    auto in_up = [&](std::size_t t) { return (y[t] == 1 && alpha[t] < C) || (y[t] == -1 && alpha[t] > 0); };
    auto in_low = [&](std::size_t t) { return (y[t] == 1 && alpha[t] > 0) || (y[t] == -1 && alpha[t] < C); };

    BinarySolution sol;
    constexpr double kTau = 1e-12;
    for (; sol.iterations < cfg.max_passes; ++sol.iterations) {
        double gmax = -std::numeric_limits<double>::infinity(), gmin = std::numeric_limits<double>::infinity();
        std::size_t i = n, j = n;
        for (std::size_t t = 0; t < n; ++t) {
            const double v = -y[t] * G[t];
            if (in_up(t) && v > gmax) gmax = v, i = t;
            if (in_low(t) && v < gmin) gmin = v, j = t;
        }
        if (i == n || j == n || gmax - gmin <= cfg.tolerance) {
            sol.converged = true;
            break;
        }
        // Move along y_i d_i = -y_j d_j; the unconstrained step then clip.
        const double a = std::max(Q(i, i) + Q(j, j) - 2.0 * y[i] * y[j] * Q(i, j), kTau);
        const double old_i = alpha[i], old_j = alpha[j];
        if (y[i] != y[j]) {
            const double delta = (-G[i] - G[j]) / a;
            const double diff = old_i - old_j;
            alpha[i] += delta;
            alpha[j] += delta;
            if (diff > 0 && alpha[j] < 0) alpha[j] = 0, alpha[i] = diff;
            else if (diff <= 0 && alpha[i] < 0) alpha[i] = 0, alpha[j] = -diff;
            if (diff > 0 && alpha[i] > C) alpha[i] = C, alpha[j] = C - diff;
            else if (diff <= 0 && alpha[j] > C) alpha[j] = C, alpha[i] = C + diff;
        } else {
            const double delta = (G[i] - G[j]) / a;
            const double sum = old_i + old_j;
            alpha[i] -= delta;
            alpha[j] += delta;
            if (sum > C && alpha[i] > C) alpha[i] = C, alpha[j] = sum - C;
            else if (sum <= C && alpha[j] < 0) alpha[j] = 0, alpha[i] = sum;
            if (sum > C && alpha[j] > C) alpha[j] = C, alpha[i] = sum - C;
            else if (sum <= C && alpha[i] < 0) alpha[i] = 0, alpha[j] = sum;
        }
        const double di = alpha[i] - old_i, dj = alpha[j] - old_j;
        for (std::size_t t = 0; t < n; ++t) G[t] += Q(t, i) * di + Q(t, j) * dj;
    }

    // Bias from free vectors, or the midpoint of the feasible interval.
    double sum_free = 0.0, ub = std::numeric_limits<double>::infinity(), lb = -ub;
    std::size_t free = 0;
    for (std::size_t t = 0; t < n; ++t) {
        const double yg = y[t] * G[t];
        if (alpha[t] > 0 && alpha[t] < C) {
            sum_free += yg;
            ++free;
        } else if ((alpha[t] >= C && y[t] == -1) || (alpha[t] <= 0 && y[t] == 1)) {
            ub = std::min(ub, yg);
        } else {
            lb = std::max(lb, yg);
        }
    }
    const double rho = free ? sum_free / static_cast<double>(free) : (ub + lb) / 2.0;

    sol.alpha = alpha;
    sol.objective = dual_objective(alpha, y, K);
    sol.model.gamma = gamma;
    sol.model.bias = -rho;
    for (std::size_t t = 0; t < n; ++t) {
        if (alpha[t] <= 0) continue;
        sol.model.support.push(x.row(t));
        sol.model.coef.push_back(alpha[t] * y[t]);
    }
    sol.model.support.dim = x.dim;
    return sol;
}

inline BinarySVM train_binary_svm(const PointSet& x, std::span<const int> y, const SVMConfig& cfg) {
    return solve_binary_svm(x, y, cfg).model;
}

struct SVMModel {
    SVMConfig config;
    std::size_t dim = 0;
    std::vector<BinarySVM> machines;  // machine k: class k (+1) versus the rest

    std::vector<double> decision_values(std::span<const double> x) const {
        if (x.size() != dim) throw DataError("SVM input has the wrong dimension");
        std::vector<double> out;
        for (const auto& m : machines) out.push_back(m.decision(x));
        return out;
    }

    std::size_t predict(std::span<const double> x) const { return argmax(decision_values(x)); }
};

/// One-vs-rest. A class absent from `labels` (or present with every point)
/// gets a constant machine whose bias is -1 (or +1).
inline SVMModel train_multiclass_svm(const PointSet& x, std::span<const std::size_t> labels, std::size_t classes,
                                     const SVMConfig& cfg) {
    if (classes < 2) throw ConfigError("SVM needs at least 2 classes");
    if (x.size() != labels.size() || x.size() == 0) throw DataError("SVM training set is empty or mislabelled");
    SVMModel model;
    model.config = cfg;
    model.dim = x.dim;
    const double gamma = cfg.gamma > 0 ? cfg.gamma : 1.0 / static_cast<double>(x.dim);
    model.config.gamma = gamma;
    for (std::size_t k = 0; k < classes; ++k) {
        std::vector<int> y(labels.size());
        std::size_t positives = 0;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            y[i] = labels[i] == k ? 1 : -1;
            positives += labels[i] == k;
        }
        if (positives == 0 || positives == labels.size()) {
            BinarySVM constant;
            constant.gamma = gamma;
            constant.support.dim = x.dim;
            constant.bias = positives ? 1.0 : -1.0;
            model.machines.push_back(std::move(constant));
            continue;
        }
        model.machines.push_back(train_binary_svm(x, y, model.config));
    }
    return model;
}

// Checkpoint "SVM1": u32 version, config, dim, then per machine the support
// count, support vectors (f64), coefficients (f64) and bias.

inline constexpr std::uint32_t kSvmVersion = 1;

inline void save_svm(const SVMModel& m, const std::string& path) {
    io::Writer w(path);
    w.magic("SVM1");
    w.put(kSvmVersion);
    w.put(m.config.gamma);
    w.put(m.config.C);
    w.put(m.config.tolerance);
    w.put(static_cast<std::uint64_t>(m.config.max_passes));
    w.put(static_cast<std::uint32_t>(m.dim));
    w.put(static_cast<std::uint32_t>(m.machines.size()));
    for (const auto& b : m.machines) {
        w.put(static_cast<std::uint32_t>(b.coef.size()));
        w.array<double>(std::span<const double>(b.support.values));
        w.array<double>(std::span<const double>(b.coef));
        w.put(b.bias);
        w.put(b.gamma);
    }
    w.finish();
}

inline SVMModel load_svm(const std::string& path) {
    io::Reader r(path);
    r.expect_magic("SVM1");
    if (auto v = r.get<std::uint32_t>(); v != kSvmVersion)
        throw DataError(path + ": unsupported SVM1 version " + std::to_string(v));
    SVMModel m;
    m.config.gamma = r.get<double>();
    m.config.C = r.get<double>();
    m.config.tolerance = r.get<double>();
    m.config.max_passes = r.get<std::uint64_t>();
    m.dim = r.get<std::uint32_t>();
    m.machines.resize(r.get<std::uint32_t>());
    for (auto& b : m.machines) {
        const std::size_t count = r.get<std::uint32_t>();
        b.support.dim = m.dim;
        b.support.values.resize(count * m.dim);
        b.coef.resize(count);
        r.array<double>(std::span<double>(b.support.values));
        r.array<double>(std::span<double>(b.coef));
        b.bias = r.get<double>();
        b.gamma = r.get<double>();
    }
    r.expect_end();
    return m;
}

}  // namespace longdoc
