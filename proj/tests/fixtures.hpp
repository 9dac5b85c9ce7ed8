#pragma once

// Random aggregator fixtures and the finite-difference gradient check,
// shared by the unit suite and the acceptance binary.

#include <cmath>
#include <vector>

#include "longdoc/aggregator.hpp"
#include "oracles.hpp"

namespace fixtures {

using namespace longdoc;

inline LabelSet labels_of(std::size_t c) {
    std::vector<std::string> names;
    for (std::size_t k = 0; k < c; ++k) names.push_back("c" + std::to_string(k));
    return LabelSet(names);
}

/// Double-precision model with every parameter drawn from U(-scale, scale)
/// (gamma drawn around 1) so no path is trivially zero.
inline AggregatorModel<double> random_model(std::size_t input, std::size_t hidden, std::size_t classes,
                                            std::uint64_t seed, double scale = 0.5) {
    auto m = make_aggregator<double>(labels_of(classes), input, hidden, 1, seed);
    Rng rng(seed ^ 0xabcdefULL);
    for (auto& p : m.params) p = rng.uniform(-scale, scale);
    for (std::size_t k = 0; k < m.dims.doc_dim(); ++k) m.params[m.layout.gamma + k] = rng.uniform(0.5, 1.5);
    m.bn.eps = 1e-8;
    return m;
}

inline Sequence<double> random_sequence(std::size_t steps, std::size_t dim, Rng& rng, std::size_t pad = 0) {
    std::vector<std::vector<double>> rows(steps, std::vector<double>(dim));
    for (auto& r : rows)
        for (auto& v : r) v = rng.uniform(-1.0, 1.0);
    return Sequence<double>::from_rows(rows, steps + pad);
}

struct GradCheck {
    double max_param_error = 0.0;
    double max_input_error = 0.0;
    std::size_t checked = 0;
};

/// Central differences of the mean train-mode batch loss against backward(),
/// over every parameter and every real input coordinate.
inline GradCheck finite_difference_check(AggregatorModel<double>& m, std::vector<Sequence<double>>& docs,
                                         const std::vector<std::size_t>& gold, double step = 1e-5) {
    std::vector<const Sequence<double>*> ptrs;
    for (auto& d : docs) ptrs.push_back(&d);
    std::span<const Sequence<double>* const> batch(ptrs);
    auto loss = [&] {
        auto tr = forward_batch(m, batch, Mode::train);
        return batch_loss(tr.head, std::span<const std::size_t>(gold));
    };
    auto tr = forward_batch(m, batch, Mode::train);
    auto g = backward(m, batch, tr, std::span<const std::size_t>(gold), true);

    GradCheck res;
    for (std::size_t i = 0; i < m.params.size(); ++i) {
        double fd = oracle::central_difference(loss, m.params[i], step);
        res.max_param_error = std::max(res.max_param_error, oracle::relative_error(g.params[i], fd));
        ++res.checked;
    }
    for (std::size_t b = 0; b < docs.size(); ++b) {
        const std::size_t E = m.dims.input;
        for (std::size_t t = 0; t < docs[b].steps; ++t) {
            if (!docs[b].mask[t]) continue;
            for (std::size_t k = 0; k < E; ++k) {
                double fd = oracle::central_difference(loss, docs[b].x[t * E + k], step);
                res.max_input_error =
                    std::max(res.max_input_error, oracle::relative_error(g.inputs[b][t * E + k], fd));
                ++res.checked;
            }
        }
    }
    return res;
}

/// Gate blocks of one direction, as oracle matrices.
inline oracle::LstmGates oracle_gates(const AggregatorModel<double>& m, const ParamLayout::Direction& d) {
    return oracle::gates_from_stacked(m.at(d.wx), m.at(d.wh), m.at(d.b), m.dims.input, m.dims.hidden);
}

/// h_t per real step via the oracle recurrence: forward over real steps in
/// order, backward in reverse, concatenated.
inline std::vector<oracle::Vec> oracle_bilstm(const AggregatorModel<double>& m, const Sequence<double>& s) {
    const std::size_t E = m.dims.input;
    std::vector<oracle::Vec> xs;
    for (std::size_t t = 0; t < s.steps; ++t)
        if (s.mask[t]) xs.emplace_back(s.x.begin() + t * E, s.x.begin() + (t + 1) * E);
    auto fwd = oracle::lstm_run(oracle_gates(m, m.layout.fwd), xs);
    std::vector<oracle::Vec> rev(xs.rbegin(), xs.rend());
    auto bwd = oracle::lstm_run(oracle_gates(m, m.layout.bwd), rev);
    std::vector<oracle::Vec> out;
    for (std::size_t t = 0; t < xs.size(); ++t) {
        oracle::Vec h = fwd[t];
        h.insert(h.end(), bwd[xs.size() - 1 - t].begin(), bwd[xs.size() - 1 - t].end());
        out.push_back(h);
    }
    return out;
}

inline oracle::AttentionResult oracle_attention(const AggregatorModel<double>& m,
                                                const std::vector<oracle::Vec>& hs) {
    const std::size_t D = m.dims.doc_dim();
    auto wa = oracle::unpack(m.at(m.layout.wa), D, D);
    oracle::Vec ba(m.at(m.layout.ba), m.at(m.layout.ba) + D);
    oracle::Vec uw(m.at(m.layout.uw), m.at(m.layout.uw) + D);
    return oracle::attention(wa, ba, uw, hs);
}

inline oracle::Vec oracle_classify(const AggregatorModel<double>& m, const oracle::Vec& d) {
    const std::size_t D = m.dims.doc_dim(), C = m.dims.classes;
    oracle::Vec gamma(m.at(m.layout.gamma), m.at(m.layout.gamma) + D);
    oracle::Vec beta(m.at(m.layout.beta), m.at(m.layout.beta) + D);
    oracle::Vec b(m.at(m.layout.b), m.at(m.layout.b) + C);
    return oracle::bn_affine_softmax(d, m.bn.running_mean, m.bn.running_var, m.bn.eps, gamma, beta,
                                     oracle::unpack(m.at(m.layout.w), C, D), b);
}

}  // namespace fixtures
