#pragma once

// Classification metrics: confusion matrix, per-class P/R/F1, macro/micro F1.

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "longdoc/errors.hpp"

namespace longdoc {

/// counts[gold][predicted]
using ConfusionMatrix = std::vector<std::vector<std::size_t>>;

inline ConfusionMatrix confusion_matrix(std::span<const std::size_t> predicted, std::span<const std::size_t> gold,
                                        std::size_t classes) {
    if (predicted.size() != gold.size()) throw DataError("prediction and gold sequences differ in length");
    ConfusionMatrix m(classes, std::vector<std::size_t>(classes, 0));
    for (std::size_t i = 0; i < gold.size(); ++i) {
        if (gold[i] >= classes || predicted[i] >= classes)
            throw DataError("label index out of range in confusion matrix");
        ++m[gold[i]][predicted[i]];
    }
    return m;
}

struct ClassScores {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t support = 0;
};

struct F1Scores {
    std::vector<ClassScores> per_class;
    double macro_f1 = 0.0;
    double micro_f1 = 0.0;
    ConfusionMatrix confusion;
    std::size_t total = 0;
};

/// F1 with the 0 convention whenever a denominator vanishes.
inline F1Scores f1_scores(const ConfusionMatrix& m) {
    const std::size_t c = m.size();
    F1Scores s;
    s.confusion = m;
    s.per_class.resize(c);
    std::size_t trace = 0;
    for (std::size_t k = 0; k < c; ++k) {
        std::size_t tp = m[k][k];
        std::size_t row = std::accumulate(m[k].begin(), m[k].end(), std::size_t{0});
        std::size_t col = 0;
        for (std::size_t g = 0; g < c; ++g) col += m[g][k];
        auto& cs = s.per_class[k];
        cs.support = row;
        cs.precision = col ? static_cast<double>(tp) / col : 0.0;
        cs.recall = row ? static_cast<double>(tp) / row : 0.0;
        cs.f1 = cs.precision + cs.recall > 0 ? 2 * cs.precision * cs.recall / (cs.precision + cs.recall) : 0.0;
        s.total += row;
        trace += tp;
    }
    double sum = 0.0;
    for (const auto& cs : s.per_class) sum += cs.f1;
    s.macro_f1 = c ? sum / static_cast<double>(c) : 0.0;
    // Single-label: pooled precision = pooled recall = accuracy.
    s.micro_f1 = s.total ? static_cast<double>(trace) / s.total : 0.0;
    return s;
}

inline F1Scores f1_scores(std::span<const std::size_t> predicted, std::span<const std::size_t> gold,
                          std::size_t classes) {
    if (gold.empty()) throw DataError("cannot score an empty prediction set");
    return f1_scores(confusion_matrix(predicted, gold, classes));
}

inline double macro_f1(std::span<const std::size_t> predicted, std::span<const std::size_t> gold,
                       std::size_t classes) {
    return f1_scores(predicted, gold, classes).macro_f1;
}

/// Lowest index wins ties.
template <class Range>
std::size_t argmax(const Range& values) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < std::size(values); ++k)
        if (values[k] > values[best]) best = k;
    return best;
}

}  // namespace longdoc
