#pragma once

// Chunk-sequence aggregation and the linear classification head.
//
//   h_t   = [lstm_fwd(E)_t ; lstm_bwd(E)_t]                (2H)
//   u_t   = tanh(W_a h_t + b_a)
//   a_t   = softmax_t(u_t . u_w)                            over real steps
//   d     = sum_t a_t h_t
//   s     = softmax(W BN(d) + b)
//
// Everything is templated on the scalar so the same code runs in double for
// gradient checks and in float for training and checkpoints. All trainable
// tensors live in one flat vector described by ParamLayout; gradients and
// Adam moments share that layout.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "longdoc/binary_io.hpp"
#include "longdoc/corpus.hpp"
#include "longdoc/errors.hpp"
#include "longdoc/metrics.hpp"
#include "longdoc/random.hpp"

namespace longdoc {

enum class Mode { train, eval };

struct AggregatorDims {
    std::size_t input = 100;   // chunk embedding dim
    std::size_t hidden = 64;   // per direction; document vector is 2*hidden
    std::size_t classes = 2;

    std::size_t doc_dim() const { return 2 * hidden; }
    friend bool operator==(const AggregatorDims&, const AggregatorDims&) = default;
};

/// Offsets of every tensor in the flat parameter vector. LSTM gate blocks are
/// stacked in the order input, forget, cell, output.
struct ParamLayout {
    struct Direction {
        std::size_t wx = 0;  // 4H x input
        std::size_t wh = 0;  // 4H x H
        std::size_t b = 0;   // 4H
    };
    AggregatorDims dims;
    Direction fwd, bwd;
    std::size_t wa = 0;     // D x D
    std::size_t ba = 0;     // D
    std::size_t uw = 0;     // D
    std::size_t gamma = 0;  // D
    std::size_t beta = 0;   // D
    std::size_t w = 0;      // C x D
    std::size_t b = 0;      // C
    std::size_t total = 0;

    static ParamLayout make(const AggregatorDims& dims) {
        ParamLayout l;
        l.dims = dims;
        const std::size_t H = dims.hidden, E = dims.input, D = dims.doc_dim(), C = dims.classes;
        std::size_t off = 0;
        auto take = [&](std::size_t n) {
            std::size_t at = off;
            off += n;
            return at;
        };
        for (Direction* d : {&l.fwd, &l.bwd}) {
            d->wx = take(4 * H * E);
            d->wh = take(4 * H * H);
            d->b = take(4 * H);
        }
        l.wa = take(D * D);
        l.ba = take(D);
        l.uw = take(D);
        l.gamma = take(D);
        l.beta = take(D);
        l.w = take(C * D);
        l.b = take(C);
        l.total = off;
        return l;
    }
};

template <class T>
struct BatchNormStats {
    std::vector<T> running_mean;
    std::vector<T> running_var;
    double momentum = 0.1;
    double eps = 1e-8;
};

template <class T>
struct AdamState {
    std::vector<T> m;
    std::vector<T> v;
    std::uint64_t step = 0;

    explicit AdamState(std::size_t n = 0) : m(n, T(0)), v(n, T(0)) {}
    friend bool operator==(const AdamState&, const AdamState&) = default;
};

struct AdamConfig {
    double lr = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

template <class T>
struct AggregatorModel {
    LabelSet labels;
    std::size_t n_chunks = 1;
    AggregatorDims dims;
    ParamLayout layout;
    std::vector<T> params;
    BatchNormStats<T> bn;
    std::optional<AdamState<T>> adam;

    const T* at(std::size_t offset) const { return params.data() + offset; }
    T* at(std::size_t offset) { return params.data() + offset; }
};

/// Seeded initialization: gate weights U(±1/√H), forget bias 1, W_a and W
/// U(±1/√D), u_w U(±0.1), γ = 1, everything else 0. BN running stats (0, 1).
template <class T>
AggregatorModel<T> make_aggregator(const LabelSet& labels, std::size_t input_dim, std::size_t hidden,
                                   std::size_t n_chunks, std::uint64_t seed) {
    if (input_dim == 0 || hidden == 0) throw ConfigError("aggregator dimensions must be positive");
    AggregatorModel<T> m;
    m.labels = labels;
    m.n_chunks = n_chunks;
    m.dims = {input_dim, hidden, labels.size()};
    m.layout = ParamLayout::make(m.dims);
    m.params.assign(m.layout.total, T(0));
    const std::size_t H = hidden, E = input_dim, D = m.dims.doc_dim(), C = m.dims.classes;
    Rng rng(seed);
    auto fill = [&](std::size_t off, std::size_t n, double half) {
        for (std::size_t i = 0; i < n; ++i) m.params[off + i] = static_cast<T>(rng.uniform(-half, half));
    };
    const double gate = 1.0 / std::sqrt(static_cast<double>(H));
    for (const auto* d : {&m.layout.fwd, &m.layout.bwd}) {
        fill(d->wx, 4 * H * E, gate);
        fill(d->wh, 4 * H * H, gate);
        for (std::size_t k = 0; k < H; ++k) m.params[d->b + H + k] = T(1);
    }
    const double fan = 1.0 / std::sqrt(static_cast<double>(D));
    fill(m.layout.wa, D * D, fan);
    fill(m.layout.uw, D, 0.1);
    for (std::size_t k = 0; k < D; ++k) m.params[m.layout.gamma + k] = T(1);
    fill(m.layout.w, C * D, fan);
    m.bn.running_mean.assign(D, T(0));
    m.bn.running_var.assign(D, T(1));
    return m;
}

/// A document's chunk embeddings, steps x input row-major, with a mask of
/// real (1) versus padded (0) steps.
template <class T>
struct Sequence {
    std::vector<T> x;
    std::size_t steps = 0;
    std::vector<std::uint8_t> mask;

    std::size_t real_steps() const { return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), 1)); }

    template <class U>
    static Sequence from_rows(const std::vector<std::vector<U>>& rows, std::size_t pad_to = 0) {
        Sequence s;
        s.steps = std::max(rows.size(), pad_to);
        const std::size_t dim = rows.empty() ? 0 : rows.front().size();
        s.x.assign(s.steps * dim, T(0));
        s.mask.assign(s.steps, 0);
        for (std::size_t t = 0; t < rows.size(); ++t) {
            if (rows[t].size() != dim) throw DataError("ragged chunk embeddings");
            for (std::size_t k = 0; k < dim; ++k) s.x[t * dim + k] = static_cast<T>(rows[t][k]);
            s.mask[t] = 1;
        }
        return s;
    }
};

namespace agg_detail {

template <class T>
T sigmoid(T x) {
    return T(1) / (T(1) + std::exp(-x));
}

/// y += A x for row-major A (rows x cols).
template <class T>
void gemv_add(const T* a, const T* x, T* y, std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) {
        const T* row = a + r * cols;
        T s = T(0);
        for (std::size_t c = 0; c < cols; ++c) s += row[c] * x[c];
        y[r] += s;
    }
}

/// y += A^T x for row-major A (rows x cols).
template <class T>
void gemv_t_add(const T* a, const T* x, T* y, std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) {
        const T* row = a + r * cols;
        const T xr = x[r];
        for (std::size_t c = 0; c < cols; ++c) y[c] += row[c] * xr;
    }
}

/// G += x y^T for G (rows x cols).
template <class T>
void outer_add(const T* x, const T* y, T* g, std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) {
        T* row = g + r * cols;
        const T xr = x[r];
        for (std::size_t c = 0; c < cols; ++c) row[c] += xr * y[c];
    }
}

}  // namespace agg_detail

/// One LSTM direction over the real steps of a sequence.
template <class T>
struct DirectionTrace {
    std::vector<std::size_t> order;  // time indices in processing order
    std::vector<T> gates;            // per processed step: i, f, g, o (4H), post-activation
    std::vector<T> cell;             // per processed step: c (H)
    std::vector<T> tanh_cell;
    std::vector<T> hidden;           // per processed step: h (H)
};

template <class T>
struct BiLstmTrace {
    DirectionTrace<T> fwd, bwd;
    std::vector<T> h;  // steps x 2H; zero at masked steps
    std::size_t steps = 0;
};

template <class T>
DirectionTrace<T> lstm_direction(const AggregatorModel<T>& m, const ParamLayout::Direction& p, const Sequence<T>& seq,
                                 bool reverse) {
    using namespace agg_detail;
    const std::size_t H = m.dims.hidden, E = m.dims.input;
    DirectionTrace<T> tr;
    for (std::size_t k = 0; k < seq.steps; ++k) {
        std::size_t t = reverse ? seq.steps - 1 - k : k;
        if (seq.mask[t]) tr.order.push_back(t);
    }
    const std::size_t L = tr.order.size();
    tr.gates.assign(L * 4 * H, T(0));
    tr.cell.assign(L * H, T(0));
    tr.tanh_cell.assign(L * H, T(0));
    tr.hidden.assign(L * H, T(0));
    std::vector<T> z(4 * H);
    const std::vector<T> zero(H, T(0));
    for (std::size_t k = 0; k < L; ++k) {
        const T* x = seq.x.data() + tr.order[k] * E;
        const T* h_prev = k ? tr.hidden.data() + (k - 1) * H : zero.data();
        const T* c_prev = k ? tr.cell.data() + (k - 1) * H : zero.data();
        std::copy(m.at(p.b), m.at(p.b) + 4 * H, z.begin());
        gemv_add(m.at(p.wx), x, z.data(), 4 * H, E);
        gemv_add(m.at(p.wh), h_prev, z.data(), 4 * H, H);
        T* g = tr.gates.data() + k * 4 * H;
        for (std::size_t j = 0; j < H; ++j) {
            g[j] = sigmoid(z[j]);
            g[H + j] = sigmoid(z[H + j]);
            g[2 * H + j] = std::tanh(z[2 * H + j]);
            g[3 * H + j] = sigmoid(z[3 * H + j]);
        }
        T* c = tr.cell.data() + k * H;
        T* tc = tr.tanh_cell.data() + k * H;
        T* h = tr.hidden.data() + k * H;
        for (std::size_t j = 0; j < H; ++j) {
            c[j] = g[H + j] * c_prev[j] + g[j] * g[2 * H + j];
            tc[j] = std::tanh(c[j]);
            h[j] = g[3 * H + j] * tc[j];
        }
    }
    return tr;
}

template <class T>
BiLstmTrace<T> bilstm_forward(const AggregatorModel<T>& m, const Sequence<T>& seq) {
    const std::size_t H = m.dims.hidden;
    if (seq.steps == 0 || seq.x.size() != seq.steps * m.dims.input || seq.mask.size() != seq.steps)
        throw DataError("sequence does not match the aggregator input dimension");
    BiLstmTrace<T> tr;
    tr.steps = seq.steps;
    tr.fwd = lstm_direction(m, m.layout.fwd, seq, false);
    tr.bwd = lstm_direction(m, m.layout.bwd, seq, true);
    tr.h.assign(seq.steps * 2 * H, T(0));
    for (std::size_t k = 0; k < tr.fwd.order.size(); ++k) {
        const std::size_t t = tr.fwd.order[k];
        std::copy_n(tr.fwd.hidden.data() + k * H, H, tr.h.data() + t * 2 * H);
    }
    for (std::size_t k = 0; k < tr.bwd.order.size(); ++k) {
        const std::size_t t = tr.bwd.order[k];
        std::copy_n(tr.bwd.hidden.data() + k * H, H, tr.h.data() + t * 2 * H + H);
    }
    return tr;
}

template <class T>
struct AttentionTrace {
    std::vector<T> u;      // steps x D
    std::vector<T> alpha;  // steps; 0 at masked steps
    std::vector<T> d;      // D
};

/// Additive attention over h (steps x D). Masked steps are excluded from the
/// softmax and get weight 0.
template <class T>
AttentionTrace<T> attention_forward(const AggregatorModel<T>& m, std::span<const T> h,
                                    std::span<const std::uint8_t> mask) {
    using namespace agg_detail;
    const std::size_t D = m.dims.doc_dim();
    const std::size_t steps = mask.size();
    if (h.size() != steps * D) throw DataError("attention input has the wrong shape");
    if (std::find(mask.begin(), mask.end(), 1) == mask.end()) throw DataError("attention over a fully masked sequence");
    AttentionTrace<T> tr;
    tr.u.assign(steps * D, T(0));
    tr.alpha.assign(steps, T(0));
    tr.d.assign(D, T(0));
    std::vector<T> score(steps, T(0));
    T best = -std::numeric_limits<T>::infinity();
    const T* uw = m.at(m.layout.uw);
    for (std::size_t t = 0; t < steps; ++t) {
        if (!mask[t]) continue;
        T* u = tr.u.data() + t * D;
        std::copy_n(m.at(m.layout.ba), D, u);
        gemv_add(m.at(m.layout.wa), h.data() + t * D, u, D, D);
        T s = T(0);
        for (std::size_t k = 0; k < D; ++k) {
            u[k] = std::tanh(u[k]);
            s += u[k] * uw[k];
        }
        score[t] = s;
        best = std::max(best, s);
    }
    T z = T(0);
    for (std::size_t t = 0; t < steps; ++t) {
        if (!mask[t]) continue;
        tr.alpha[t] = std::exp(score[t] - best);
        z += tr.alpha[t];
    }
    for (std::size_t t = 0; t < steps; ++t) {
        if (!mask[t]) continue;
        tr.alpha[t] /= z;
        for (std::size_t k = 0; k < D; ++k) tr.d[k] += tr.alpha[t] * h[t * D + k];
    }
    return tr;
}

/// Batch-norm, affine and softmax over a batch of document vectors.
template <class T>
struct HeadTrace {
    Mode mode = Mode::eval;
    std::size_t batch = 0;
    std::vector<T> mean, var;  // D; batch statistics in train mode, running in eval
    std::vector<T> xhat;       // B x D
    std::vector<T> y;          // B x D
    std::vector<T> logits;     // B x C
    std::vector<T> probs;      // B x C
};

template <class T>
void softmax_inplace(std::span<T> v) {
    const T best = *std::max_element(v.begin(), v.end());
    T z = T(0);
    for (auto& x : v) {
        x = std::exp(x - best);
        z += x;
    }
    for (auto& x : v) x /= z;
}

/// `docs` is B x D row-major. Train mode normalizes with the (biased) batch
/// statistics and requires B >= 2; eval mode uses the running statistics.
template <class T>
HeadTrace<T> head_forward(const AggregatorModel<T>& m, std::span<const T> docs, Mode mode) {
    using namespace agg_detail;
    const std::size_t D = m.dims.doc_dim(), C = m.dims.classes;
    if (docs.size() % D != 0 || docs.empty()) throw DataError("document vectors have the wrong dimension");
    HeadTrace<T> tr;
    tr.mode = mode;
    tr.batch = docs.size() / D;
    const std::size_t B = tr.batch;
    if (mode == Mode::train) {
        if (B < 2) throw DataError("train-mode batch normalization needs a batch of at least 2");
        tr.mean.assign(D, T(0));
        tr.var.assign(D, T(0));
        for (std::size_t i = 0; i < B; ++i)
            for (std::size_t k = 0; k < D; ++k) tr.mean[k] += docs[i * D + k];
        for (auto& x : tr.mean) x /= static_cast<T>(B);
        for (std::size_t i = 0; i < B; ++i)
            for (std::size_t k = 0; k < D; ++k) {
                T dv = docs[i * D + k] - tr.mean[k];
                tr.var[k] += dv * dv;
            }
        for (auto& x : tr.var) x /= static_cast<T>(B);
    } else {
        tr.mean = m.bn.running_mean;
        tr.var = m.bn.running_var;
    }
    const T eps = static_cast<T>(m.bn.eps);
    const T* gamma = m.at(m.layout.gamma);
    const T* beta = m.at(m.layout.beta);
    tr.xhat.resize(B * D);
    tr.y.resize(B * D);
    tr.logits.assign(B * C, T(0));
    for (std::size_t k = 0; k < D; ++k) {
        const T inv = T(1) / std::sqrt(tr.var[k] + eps);
        for (std::size_t i = 0; i < B; ++i) {
            tr.xhat[i * D + k] = (docs[i * D + k] - tr.mean[k]) * inv;
            tr.y[i * D + k] = gamma[k] * tr.xhat[i * D + k] + beta[k];
        }
    }
    for (std::size_t i = 0; i < B; ++i) {
        T* logit = tr.logits.data() + i * C;
        std::copy_n(m.at(m.layout.b), C, logit);
        gemv_add(m.at(m.layout.w), tr.y.data() + i * D, logit, C, D);
    }
    tr.probs = tr.logits;
    for (std::size_t i = 0; i < B; ++i) softmax_inplace(std::span<T>(tr.probs).subspan(i * C, C));
    return tr;
}

/// Folds a train-mode batch's statistics into the running estimates. The
/// running variance uses the unbiased batch variance.
template <class T>
void update_running_stats(AggregatorModel<T>& m, const HeadTrace<T>& tr) {
    if (tr.mode != Mode::train) return;
    const double mom = m.bn.momentum;
    const double unbias = static_cast<double>(tr.batch) / static_cast<double>(tr.batch - 1);
    for (std::size_t k = 0; k < tr.mean.size(); ++k) {
        m.bn.running_mean[k] = static_cast<T>((1 - mom) * m.bn.running_mean[k] + mom * tr.mean[k]);
        m.bn.running_var[k] = static_cast<T>((1 - mom) * m.bn.running_var[k] + mom * unbias * tr.var[k]);
    }
}

/// Eval-mode probabilities for a single document vector.
template <class T>
std::vector<T> classify(const AggregatorModel<T>& m, std::span<const T> d) {
    return head_forward(m, d, Mode::eval).probs;
}

inline constexpr double kProbabilityFloor = 1e-12;

template <class T>
T cross_entropy(std::span<const T> probs, std::size_t gold) {
    return -std::log(std::max(probs[gold], static_cast<T>(kProbabilityFloor)));
}

template <class T>
struct BatchTrace {
    std::vector<BiLstmTrace<T>> lstm;
    std::vector<AttentionTrace<T>> attention;
    HeadTrace<T> head;
};

template <class T>
BatchTrace<T> forward_batch(const AggregatorModel<T>& m, std::span<const Sequence<T>* const> batch, Mode mode) {
    const std::size_t D = m.dims.doc_dim();
    BatchTrace<T> tr;
    std::vector<T> docs(batch.size() * D);
    for (std::size_t i = 0; i < batch.size(); ++i) {
        tr.lstm.push_back(bilstm_forward(m, *batch[i]));
        tr.attention.push_back(attention_forward(m, std::span<const T>(tr.lstm.back().h), batch[i]->mask));
        std::copy(tr.attention.back().d.begin(), tr.attention.back().d.end(), docs.begin() + i * D);
    }
    tr.head = head_forward(m, std::span<const T>(docs), mode);
    return tr;
}

/// Mean cross-entropy of the batch.
template <class T>
T batch_loss(const HeadTrace<T>& head, std::span<const std::size_t> gold) {
    const std::size_t C = head.probs.size() / head.batch;
    T total = T(0);
    for (std::size_t i = 0; i < head.batch; ++i)
        total += cross_entropy(std::span<const T>(head.probs).subspan(i * C, C), gold[i]);
    return total / static_cast<T>(head.batch);
}

template <class T>
struct Gradients {
    std::vector<T> params;               // same layout as the model
    std::vector<std::vector<T>> inputs;  // per document, steps x input (if requested)
};

namespace agg_detail {

template <class T>
void lstm_direction_backward(const AggregatorModel<T>& m, const ParamLayout::Direction& p, const Sequence<T>& seq,
                             const DirectionTrace<T>& tr, std::span<const T> dh_full, std::size_t column,
                             std::vector<T>& grad, std::vector<T>* dx) {
    const std::size_t H = m.dims.hidden, E = m.dims.input, L = tr.order.size();
    std::vector<T> dh_next(H, T(0)), dc_next(H, T(0)), dz(4 * H), dh(H);
    const std::vector<T> zero(H, T(0));
    for (std::size_t kk = L; kk-- > 0;) {
        const std::size_t t = tr.order[kk];
        const T* g = tr.gates.data() + kk * 4 * H;
        const T* tc = tr.tanh_cell.data() + kk * H;
        const T* c_prev = kk ? tr.cell.data() + (kk - 1) * H : zero.data();
        const T* h_prev = kk ? tr.hidden.data() + (kk - 1) * H : zero.data();
        for (std::size_t j = 0; j < H; ++j) dh[j] = dh_full[t * 2 * H + column + j] + dh_next[j];
        for (std::size_t j = 0; j < H; ++j) {
            const T i = g[j], f = g[H + j], gg = g[2 * H + j], o = g[3 * H + j];
            const T dc = dc_next[j] + dh[j] * o * (T(1) - tc[j] * tc[j]);
            dz[j] = dc * gg * i * (T(1) - i);
            dz[H + j] = dc * c_prev[j] * f * (T(1) - f);
            dz[2 * H + j] = dc * i * (T(1) - gg * gg);
            dz[3 * H + j] = dh[j] * tc[j] * o * (T(1) - o);
            dc_next[j] = dc * f;
        }
        const T* x = seq.x.data() + t * E;
        outer_add(dz.data(), x, grad.data() + p.wx, 4 * H, E);
        outer_add(dz.data(), h_prev, grad.data() + p.wh, 4 * H, H);
        for (std::size_t j = 0; j < 4 * H; ++j) grad[p.b + j] += dz[j];
        std::fill(dh_next.begin(), dh_next.end(), T(0));
        gemv_t_add(m.at(p.wh), dz.data(), dh_next.data(), 4 * H, H);
        if (dx) gemv_t_add(m.at(p.wx), dz.data(), dx->data() + t * E, 4 * H, E);
    }
}

}  // namespace agg_detail

/// Exact gradients of the mean batch cross-entropy with respect to every
/// parameter (and optionally every input embedding).
template <class T>
Gradients<T> backward(const AggregatorModel<T>& m, std::span<const Sequence<T>* const> batch,
                      const BatchTrace<T>& tr, std::span<const std::size_t> gold, bool input_grads = false) {
    using namespace agg_detail;
    const std::size_t D = m.dims.doc_dim(), C = m.dims.classes, B = tr.head.batch;
    const auto& L = m.layout;
    Gradients<T> out;
    out.params.assign(L.total, T(0));
    auto& g = out.params;

    // Softmax + cross-entropy; the clamp zeroes the gradient when active.
    std::vector<T> dlogits(B * C, T(0));
    for (std::size_t i = 0; i < B; ++i) {
        const T* p = tr.head.probs.data() + i * C;
        if (p[gold[i]] < static_cast<T>(kProbabilityFloor)) continue;
        for (std::size_t k = 0; k < C; ++k)
            dlogits[i * C + k] = (p[k] - (k == gold[i] ? T(1) : T(0))) / static_cast<T>(B);
    }

    // Affine head and BN scale/shift.
    std::vector<T> dxhat(B * D, T(0));
    for (std::size_t i = 0; i < B; ++i) {
        const T* dl = dlogits.data() + i * C;
        outer_add(dl, tr.head.y.data() + i * D, g.data() + L.w, C, D);
        for (std::size_t k = 0; k < C; ++k) g[L.b + k] += dl[k];
        std::vector<T> dy(D, T(0));
        gemv_t_add(m.at(L.w), dl, dy.data(), C, D);
        for (std::size_t k = 0; k < D; ++k) {
            g[L.gamma + k] += dy[k] * tr.head.xhat[i * D + k];
            g[L.beta + k] += dy[k];
            dxhat[i * D + k] = dy[k] * m.params[L.gamma + k];
        }
    }

    // Batch normalization.
    std::vector<T> dd(B * D, T(0));
    const T eps = static_cast<T>(m.bn.eps);
    for (std::size_t k = 0; k < D; ++k) {
        const T inv = T(1) / std::sqrt(tr.head.var[k] + eps);
        if (tr.head.mode == Mode::eval) {
            for (std::size_t i = 0; i < B; ++i) dd[i * D + k] = dxhat[i * D + k] * inv;
            continue;
        }
        T sum = T(0), sum_x = T(0);
        for (std::size_t i = 0; i < B; ++i) {
            sum += dxhat[i * D + k];
            sum_x += dxhat[i * D + k] * tr.head.xhat[i * D + k];
        }
        const T bb = static_cast<T>(B);
        for (std::size_t i = 0; i < B; ++i)
            dd[i * D + k] = inv / bb * (bb * dxhat[i * D + k] - sum - tr.head.xhat[i * D + k] * sum_x);
    }

    if (input_grads) out.inputs.resize(B);
    for (std::size_t i = 0; i < B; ++i) {
        const auto& seq = *batch[i];
        const auto& lt = tr.lstm[i];
        const auto& at = tr.attention[i];
        const T* ddi = dd.data() + i * D;
        const std::size_t steps = seq.steps;
        std::vector<T> dh(steps * D, T(0));

        // Attention pooling.
        std::vector<T> dalpha(steps, T(0));
        T weighted = T(0);
        for (std::size_t t = 0; t < steps; ++t) {
            if (!seq.mask[t]) continue;
            const T* h = lt.h.data() + t * D;
            T s = T(0);
            for (std::size_t k = 0; k < D; ++k) {
                s += ddi[k] * h[k];
                dh[t * D + k] += at.alpha[t] * ddi[k];
            }
            dalpha[t] = s;
            weighted += at.alpha[t] * s;
        }
        const T* uw = m.at(L.uw);
        std::vector<T> dpre(D);
        for (std::size_t t = 0; t < steps; ++t) {
            if (!seq.mask[t]) continue;
            const T dscore = at.alpha[t] * (dalpha[t] - weighted);
            const T* u = at.u.data() + t * D;
            for (std::size_t k = 0; k < D; ++k) {
                g[L.uw + k] += dscore * u[k];
                dpre[k] = dscore * uw[k] * (T(1) - u[k] * u[k]);
                g[L.ba + k] += dpre[k];
            }
            outer_add(dpre.data(), lt.h.data() + t * D, g.data() + L.wa, D, D);
            gemv_t_add(m.at(L.wa), dpre.data(), dh.data() + t * D, D, D);
        }

        std::vector<T>* dx = nullptr;
        if (input_grads) {
            out.inputs[i].assign(seq.x.size(), T(0));
            dx = &out.inputs[i];
        }
        lstm_direction_backward(m, L.fwd, seq, lt.fwd, std::span<const T>(dh), 0, g, dx);
        lstm_direction_backward(m, L.bwd, seq, lt.bwd, std::span<const T>(dh), m.dims.hidden, g, dx);
    }
    return out;
}

/// One Adam update with bias correction; increments state.step first.
template <class T>
void adam_step(std::span<T> params, std::span<const T> grads, AdamState<T>& state, const AdamConfig& cfg) {
    ++state.step;
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        const double m = cfg.beta1 * state.m[i] + (1 - cfg.beta1) * g;
        const double v = cfg.beta2 * state.v[i] + (1 - cfg.beta2) * g * g;
        state.m[i] = static_cast<T>(m);
        state.v[i] = static_cast<T>(v);
        params[i] = static_cast<T>(params[i] - cfg.lr * (m / c1) / (std::sqrt(v / c2) + cfg.eps));
    }
}

/// Eval-mode document vector d (pre-head).
template <class T>
std::vector<T> document_vector(const AggregatorModel<T>& m, const Sequence<T>& seq) {
    auto lt = bilstm_forward(m, seq);
    return attention_forward(m, std::span<const T>(lt.h), seq.mask).d;
}

template <class T>
std::vector<T> predict_proba(const AggregatorModel<T>& m, const Sequence<T>& seq) {
    auto d = document_vector(m, seq);
    return classify(m, std::span<const T>(d));
}

struct AggregatorConfig {
    std::size_t hidden = 64;
    AdamConfig adam;
    std::size_t batch = 32;  // use 1000 for full-corpus reproduction runs
    std::size_t max_epochs = 100;
    std::size_t patience = 10;
    double bn_momentum = 0.1;
    double bn_eps = 1e-8;
};

struct EpochLog {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double val_f1 = 0.0;
};

template <class T>
struct LabeledSequences {
    std::vector<Sequence<T>> sequences;
    std::vector<std::size_t> labels;
};

template <class T>
std::vector<std::size_t> predict_labels(const AggregatorModel<T>& m, const LabeledSequences<T>& data) {
    std::vector<std::size_t> out;
    out.reserve(data.sequences.size());
    for (const auto& s : data.sequences) out.push_back(argmax(predict_proba(m, s)));
    return out;
}

template <class T>
struct TrainResult {
    AggregatorModel<T> model;
    std::vector<EpochLog> log;
    std::size_t best_epoch = 0;
    double best_val_f1 = -1.0;
};

/// Mini-batch Adam with a seeded per-epoch shuffle. The returned model is the
/// epoch with the best validation macro-F1 (earliest on ties); training stops
/// after `patience` epochs without improvement. A trailing batch of one
/// document is merged into the previous batch.
template <class T>
TrainResult<T> train_aggregator(const LabeledSequences<T>& train, const LabeledSequences<T>& validation,
                                const LabelSet& labels, std::size_t n_chunks, const AggregatorConfig& cfg,
                                std::uint64_t seed) {
    const std::size_t N = train.sequences.size();
    if (N < 2) throw DataError("aggregator training needs at least 2 documents");
    const std::size_t input = train.sequences.front().x.size() / train.sequences.front().steps;
    TrainResult<T> res{make_aggregator<T>(labels, input, cfg.hidden, n_chunks, seed), {}, 0, -1.0};
    auto& model = res.model;
    model.bn.momentum = cfg.bn_momentum;
    model.bn.eps = cfg.bn_eps;
    model.adam = AdamState<T>(model.layout.total);

    const std::size_t batch = std::clamp<std::size_t>(cfg.batch, 2, N);
    std::vector<std::size_t> order(N);
    for (std::size_t i = 0; i < N; ++i) order[i] = i;
    Rng rng(mix_seed(seed, 7));
    std::optional<AggregatorModel<T>> best;
    std::size_t since_best = 0;

    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        rng.shuffle(order);
        std::vector<std::pair<std::size_t, std::size_t>> ranges;
        for (std::size_t b = 0; b < N; b += batch) ranges.emplace_back(b, std::min(N, b + batch));
        if (ranges.size() > 1 && ranges.back().second - ranges.back().first == 1) {
            ranges.pop_back();
            ranges.back().second = N;
        }
        double loss_sum = 0.0;
        for (auto [lo, hi] : ranges) {
            std::vector<const Sequence<T>*> seqs;
            std::vector<std::size_t> gold;
            for (std::size_t k = lo; k < hi; ++k) {
                seqs.push_back(&train.sequences[order[k]]);
                gold.push_back(train.labels[order[k]]);
            }
            auto tr = forward_batch(model, std::span<const Sequence<T>* const>(seqs), Mode::train);
            const double loss = batch_loss(tr.head, std::span<const std::size_t>(gold));
            if (!std::isfinite(loss))
                throw TrainingError("aggregator loss became non-finite in epoch " + std::to_string(epoch));
            loss_sum += loss * static_cast<double>(hi - lo);
            auto grads = backward(model, std::span<const Sequence<T>* const>(seqs), tr,
                                  std::span<const std::size_t>(gold));
            adam_step(std::span<T>(model.params), std::span<const T>(grads.params), *model.adam, cfg.adam);
            update_running_stats(model, tr.head);
        }
        EpochLog entry{epoch, loss_sum / static_cast<double>(N), 0.0};
        if (!validation.sequences.empty()) {
            auto pred = predict_labels(model, validation);
            entry.val_f1 = macro_f1(pred, validation.labels, labels.size());
        }
        res.log.push_back(entry);
        if (entry.val_f1 > res.best_val_f1) {
            res.best_val_f1 = entry.val_f1;
            res.best_epoch = epoch;
            best = model;
            since_best = 0;
        } else if (++since_best >= cfg.patience) {
            break;
        }
    }
    if (best) model = std::move(*best);
    return res;
}

// Checkpoint "AGG1": u32 version, label set, dims, BN settings, parameters
// (f32), BN running stats (f32), then a presence byte and the Adam step and
// moments (f32).

inline constexpr std::uint32_t kAggregatorVersion = 1;

inline void save_aggregator(const AggregatorModel<float>& m, const std::string& path) {
    io::Writer w(path);
    w.magic("AGG1");
    w.put(kAggregatorVersion);
    w.put(static_cast<std::uint32_t>(m.labels.size()));
    for (const auto& name : m.labels.names()) w.str(name);
    w.put(static_cast<std::uint32_t>(m.dims.input));
    w.put(static_cast<std::uint32_t>(m.dims.hidden));
    w.put(static_cast<std::uint32_t>(m.dims.classes));
    w.put(static_cast<std::uint32_t>(m.n_chunks));
    w.put(m.bn.momentum);
    w.put(m.bn.eps);
    w.array<float>(std::span<const float>(m.params));
    w.array<float>(std::span<const float>(m.bn.running_mean));
    w.array<float>(std::span<const float>(m.bn.running_var));
    w.put(static_cast<std::uint8_t>(m.adam ? 1 : 0));
    if (m.adam) {
        w.put(m.adam->step);
        w.array<float>(std::span<const float>(m.adam->m));
        w.array<float>(std::span<const float>(m.adam->v));
    }
    w.finish();
}

inline AggregatorModel<float> load_aggregator(const std::string& path) {
    io::Reader r(path);
    r.expect_magic("AGG1");
    if (auto v = r.get<std::uint32_t>(); v != kAggregatorVersion)
        throw DataError(path + ": unsupported AGG1 version " + std::to_string(v));
    AggregatorModel<float> m;
    std::vector<std::string> names(r.get<std::uint32_t>());
    for (auto& n : names) n = r.str();
    m.labels = LabelSet(std::move(names));
    m.dims.input = r.get<std::uint32_t>();
    m.dims.hidden = r.get<std::uint32_t>();
    m.dims.classes = r.get<std::uint32_t>();
    if (m.dims.classes != m.labels.size()) throw DataError(path + ": class count does not match label set");
    m.n_chunks = r.get<std::uint32_t>();
    m.bn.momentum = r.get<double>();
    m.bn.eps = r.get<double>();
    m.layout = ParamLayout::make(m.dims);
    m.params.resize(m.layout.total);
    r.array<float>(std::span<float>(m.params));
    m.bn.running_mean.resize(m.dims.doc_dim());
    m.bn.running_var.resize(m.dims.doc_dim());
    r.array<float>(std::span<float>(m.bn.running_mean));
    r.array<float>(std::span<float>(m.bn.running_var));
    if (r.get<std::uint8_t>()) {
        AdamState<float> s(m.layout.total);
        s.step = r.get<std::uint64_t>();
        r.array<float>(std::span<float>(s.m));
        r.array<float>(std::span<float>(s.v));
        m.adam = std::move(s);
    }
    r.expect_end();
    return m;
}

}  // namespace longdoc
