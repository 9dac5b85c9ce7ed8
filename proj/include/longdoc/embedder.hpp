#pragma once

// PV-DM paragraph vectors with negative sampling.
//
// Each training chunk owns a paragraph vector. For every in-vocabulary
// position the context h is the mean of the paragraph vector and the input
// vectors of the surrounding window; the model scores the centre word
// against `negative` noise words with a logistic loss and takes one SGD step
// on every participating vector. Unseen chunks get a vector by running the
// same objective with the word matrices frozen.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "longdoc/binary_io.hpp"
#include "longdoc/chunker.hpp"
#include "longdoc/corpus.hpp"
#include "longdoc/errors.hpp"
#include "longdoc/random.hpp"

namespace longdoc {

class Vocabulary {
public:
    std::size_t size() const { return words_.size(); }
    const std::string& word(std::size_t i) const { return words_[i]; }
    std::uint64_t count(std::size_t i) const { return counts_[i]; }
    std::size_t min_count() const { return min_count_; }
    std::uint64_t total_tokens() const { return total_; }
    double noise_exponent() const { return exponent_; }

    std::optional<std::uint32_t> find(std::string_view w) const {
        auto it = index_.find(std::string(w));
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

    /// Negative-sampling probability of each word, ∝ count^exponent.
    const std::vector<double>& noise() const { return noise_; }

    std::uint32_t sample_noise(Rng& rng) const {
        double u = rng.uniform();
        auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
        auto i = static_cast<std::size_t>(it - cdf_.begin());
        return static_cast<std::uint32_t>(std::min(i, words_.size() - 1));
    }

    /// Encodes a token sequence, dropping out-of-vocabulary tokens.
    std::vector<std::uint32_t> encode(std::span<const std::string> tokens) const {
        std::vector<std::uint32_t> out;
        out.reserve(tokens.size());
        for (const auto& t : tokens)
            if (auto i = find(t)) out.push_back(*i);
        return out;
    }

    /// Words are ordered by descending count, ties lexicographic. `total` is
    /// the count of all tokens seen, including filtered ones.
    static Vocabulary from_counts(std::vector<std::pair<std::string, std::uint64_t>> entries, std::size_t min_count,
                                  std::uint64_t total, double exponent = 0.75) {
        std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
            return a.second != b.second ? a.second > b.second : a.first < b.first;
        });
        std::erase_if(entries, [&](const auto& e) { return e.second < min_count; });
        return restore(std::move(entries), min_count, total, exponent);
    }

    /// Rebuilds a vocabulary from entries already in index order.
    static Vocabulary restore(std::vector<std::pair<std::string, std::uint64_t>> entries, std::size_t min_count,
                              std::uint64_t total, double exponent) {
        Vocabulary v;
        v.min_count_ = min_count;
        v.total_ = total;
        v.exponent_ = exponent;
        for (auto& [w, c] : entries) {
            if (!v.index_.emplace(w, static_cast<std::uint32_t>(v.words_.size())).second)
                throw DataError("duplicate vocabulary word: " + w);
            v.words_.push_back(std::move(w));
            v.counts_.push_back(c);
        }
        if (v.words_.empty()) throw DataError("vocabulary is empty after min_count filtering");
        v.rebuild_noise();
        return v;
    }

private:
    void rebuild_noise() {
        noise_.resize(words_.size());
        double z = 0.0;
        for (std::size_t i = 0; i < words_.size(); ++i) {
            noise_[i] = std::pow(static_cast<double>(counts_[i]), exponent_);
            z += noise_[i];
        }
        cdf_.resize(words_.size());
        double acc = 0.0;
        for (std::size_t i = 0; i < words_.size(); ++i) {
            noise_[i] /= z;
            acc += noise_[i];
            cdf_[i] = acc;
        }
    }

    std::vector<std::string> words_;
    std::vector<std::uint64_t> counts_;
    std::unordered_map<std::string, std::uint32_t> index_;
    std::vector<double> noise_;
    std::vector<double> cdf_;
    std::size_t min_count_ = 1;
    std::uint64_t total_ = 0;
    double exponent_ = 0.75;
};

inline Vocabulary build_vocab(std::span<const Chunk> chunks, std::size_t min_count, double exponent = 0.75) {
    if (chunks.empty()) throw DataError("build_vocab needs at least one chunk");
    std::unordered_map<std::string, std::uint64_t> counts;
    std::uint64_t total = 0;
    for (const auto& c : chunks) {
        for (const auto& t : c.tokens) ++counts[t];
        total += c.tokens.size();
    }
    std::vector<std::pair<std::string, std::uint64_t>> entries(counts.begin(), counts.end());
    return Vocabulary::from_counts(std::move(entries), min_count, total, exponent);
}

struct PVDMConfig {
    std::size_t dim = 100;
    std::size_t window = 5;
    std::size_t negative = 5;
    std::size_t min_count = 5;
    std::size_t epochs = 40;
    double alpha = 0.025;
    double min_alpha = 0.0001;
    std::size_t infer_steps = 50;
    double noise_exponent = 0.75;
};

struct PVDMModel {
    PVDMConfig config;
    Vocabulary vocab;
    std::vector<float> word_in;     // V x dim
    std::vector<float> word_out;    // V x dim
    std::vector<float> paragraphs;  // P x dim, row k belongs to paragraph_ids[k]
    std::vector<std::string> paragraph_ids;
    std::vector<double> epoch_loss;

    std::size_t dim() const { return config.dim; }
    std::span<const float> paragraph(std::size_t k) const {
        return std::span<const float>(paragraphs).subspan(k * dim(), dim());
    }
};

namespace pvdm_detail {

inline float sigmoid(float x) { return 1.0f / (1.0f + std::exp(-x)); }

inline float dot(const float* a, const float* b, std::size_t n) {
    float s = 0.0f;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

inline void axpy(float a, const float* x, float* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

inline void fill_uniform(std::vector<float>& v, float half_width, Rng& rng) {
    for (auto& x : v) x = static_cast<float>(rng.uniform(-half_width, half_width));
}

/// Scores `target` against the context `h` plus `negative` noise words and
/// accumulates the context gradient into `grad_h`. When `update_out` is
/// non-null (it must alias `word_out`) the output vectors are stepped too.
/// Returns the summed pair losses.
inline double score_position(const float* word_out, float* update_out, const Vocabulary& vocab, std::size_t dim,
                             std::size_t negative, std::uint32_t target, const float* h, float* grad_h, float lr,
                             Rng& rng) {
    double loss = 0.0;
    for (std::size_t k = 0; k <= negative; ++k) {
        std::uint32_t w = target;
        float label = 1.0f;
        if (k > 0) {
            w = vocab.sample_noise(rng);
            if (w == target) continue;
            label = 0.0f;
        }
        const std::size_t row = static_cast<std::size_t>(w) * dim;
        const float* out = word_out + row;
        float f = dot(h, out, dim);
        float p = sigmoid(f);
        // -log σ(f) for the positive, -log σ(-f) for noise words.
        double margin = label > 0.5f ? f : -f;
        loss += margin > 0 ? std::log1p(std::exp(-margin)) : -margin + std::log1p(std::exp(margin));
        float g = (label - p) * lr;
        axpy(g, out, grad_h, dim);
        if (update_out) axpy(g, h, update_out + row, dim);
    }
    return loss;
}

inline float linear_lr(const PVDMConfig& cfg, double progress) {
    return static_cast<float>(cfg.alpha - (cfg.alpha - cfg.min_alpha) * std::min(1.0, progress));
}

}  // namespace pvdm_detail

/// Deterministic single-worker training. Every chunk must contain at least
/// one in-vocabulary token.
inline PVDMModel train_pvdm(std::span<const Chunk> chunks, const Vocabulary& vocab, const PVDMConfig& config,
                            std::uint64_t seed) {
    using namespace pvdm_detail;
    if (config.dim == 0) throw ConfigError("embedding dim must be positive");
    const std::size_t dim = config.dim;
    std::vector<std::vector<std::uint32_t>> encoded;
    encoded.reserve(chunks.size());
    for (const auto& c : chunks) {
        encoded.push_back(vocab.encode(c.tokens));
        if (encoded.back().empty())
            throw DataError("training chunk " + c.doc_id + "#" + std::to_string(c.index) + " has no vocabulary words");
    }

    PVDMModel m;
    m.config = config;
    m.vocab = vocab;
    m.word_in.resize(vocab.size() * dim);
    m.word_out.resize(vocab.size() * dim);
    m.paragraphs.resize(chunks.size() * dim);
    const float half = 0.5f / static_cast<float>(dim);
    Rng init(seed);
    fill_uniform(m.word_in, half, init);
    fill_uniform(m.word_out, half, init);
    fill_uniform(m.paragraphs, half, init);
    for (const auto& c : chunks) m.paragraph_ids.push_back(c.doc_id + "#" + std::to_string(c.index));

    std::size_t words_per_epoch = 0;
    for (const auto& e : encoded) words_per_epoch += e.size();
    const double total_words = static_cast<double>(words_per_epoch * config.epochs);

    // Context vector of position i: mean of the paragraph and window words.
    auto context = [&](const std::vector<std::uint32_t>& seq, const float* para, std::size_t i, float* h) {
        const std::size_t lo = i >= config.window ? i - config.window : 0;
        const std::size_t hi = std::min(seq.size() - 1, i + config.window);
        std::copy(para, para + dim, h);
        std::size_t count = 1;
        for (std::size_t j = lo; j <= hi; ++j) {
            if (j == i) continue;
            axpy(1.0f, m.word_in.data() + static_cast<std::size_t>(seq[j]) * dim, h, dim);
            ++count;
        }
        const float inv = 1.0f / static_cast<float>(count);
        for (std::size_t k = 0; k < dim; ++k) h[k] *= inv;
        return inv;
    };

    // The recorded epoch loss is the objective at the end-of-epoch parameters
    // against one fixed noise sample, so epochs are comparable.
    std::vector<float> scratch(dim), scratch_h(dim);
    auto monitor_loss = [&] {
        Rng noise(mix_seed(seed, 2));
        double total = 0.0;
        for (std::size_t p = 0; p < encoded.size(); ++p)
            for (std::size_t i = 0; i < encoded[p].size(); ++i) {
                context(encoded[p], m.paragraphs.data() + p * dim, i, scratch_h.data());
                total += score_position(m.word_out.data(), nullptr, m.vocab, dim, config.negative, encoded[p][i],
                                        scratch_h.data(), scratch.data(), 0.0f, noise);
            }
        return total / static_cast<double>(std::max<std::size_t>(1, words_per_epoch));
    };

    Rng rng(mix_seed(seed, 1));
    std::vector<float> h(dim), grad_h(dim);
    std::size_t processed = 0;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        for (std::size_t p = 0; p < encoded.size(); ++p) {
            const auto& seq = encoded[p];
            float* para = m.paragraphs.data() + p * dim;
            for (std::size_t i = 0; i < seq.size(); ++i, ++processed) {
                const float lr = linear_lr(config, static_cast<double>(processed) / total_words);
                const float inv = context(seq, para, i, h.data());
                std::fill(grad_h.begin(), grad_h.end(), 0.0f);
                score_position(m.word_out.data(), m.word_out.data(), m.vocab, dim, config.negative, seq[i], h.data(),
                               grad_h.data(), lr, rng);
                // The paragraph takes the full context error (as in word2vec's
                // mean mode); window words share it in proportion 1/count.
                axpy(1.0f, grad_h.data(), para, dim);
                const std::size_t lo = i >= config.window ? i - config.window : 0;
                const std::size_t hi = std::min(seq.size() - 1, i + config.window);
                for (std::size_t j = lo; j <= hi; ++j) {
                    if (j == i) continue;
                    axpy(inv, grad_h.data(), m.word_in.data() + static_cast<std::size_t>(seq[j]) * dim, dim);
                }
            }
        }
        const double mean = monitor_loss();
        if (!std::isfinite(mean))
            throw TrainingError("PV-DM loss became non-finite in epoch " + std::to_string(epoch + 1) +
                                "; lower the learning rate");
        m.epoch_loss.push_back(mean);
    }
    return m;
}

/// Thrown when a chunk has no vocabulary words.
class OutOfVocabulary : public DataError {
public:
    using DataError::DataError;
};

/// Fits a fresh paragraph vector to `tokens` with the word matrices frozen.
inline std::vector<float> infer_vector(const PVDMModel& model, std::span<const std::string> tokens, std::size_t steps,
                                       std::uint64_t seed) {
    using namespace pvdm_detail;
    const std::size_t dim = model.dim();
    const auto seq = model.vocab.encode(tokens);
    if (seq.empty()) throw OutOfVocabulary("chunk has no vocabulary words");

    Rng rng(seed);
    std::vector<float> para(dim);
    fill_uniform(para, 0.5f / static_cast<float>(dim), rng);
    if (steps == 0) return para;

    // Context sums and counts are constant while the word matrices are frozen.
    const std::size_t window = model.config.window;
    std::vector<float> ctx(seq.size() * dim, 0.0f);
    std::vector<float> inv_count(seq.size());
    for (std::size_t i = 0; i < seq.size(); ++i) {
        const std::size_t lo = i >= window ? i - window : 0;
        const std::size_t hi = std::min(seq.size() - 1, i + window);
        std::size_t count = 1;
        for (std::size_t j = lo; j <= hi; ++j) {
            if (j == i) continue;
            axpy(1.0f, model.word_in.data() + static_cast<std::size_t>(seq[j]) * dim, ctx.data() + i * dim, dim);
            ++count;
        }
        inv_count[i] = 1.0f / static_cast<float>(count);
    }

    std::vector<float> h(dim), grad_h(dim);
    const double total = static_cast<double>(steps * seq.size());
    std::size_t processed = 0;
    for (std::size_t s = 0; s < steps; ++s) {
        for (std::size_t i = 0; i < seq.size(); ++i, ++processed) {
            const float lr = linear_lr(model.config, static_cast<double>(processed) / total);
            const float inv = inv_count[i];
            const float* c = ctx.data() + i * dim;
            for (std::size_t k = 0; k < dim; ++k) h[k] = (para[k] + c[k]) * inv;
            std::fill(grad_h.begin(), grad_h.end(), 0.0f);
            score_position(model.word_out.data(), nullptr, model.vocab, dim, model.config.negative, seq[i], h.data(),
                           grad_h.data(), lr, rng);
            axpy(1.0f, grad_h.data(), para.data(), dim);
        }
    }
    return para;
}

/// Chunk embeddings keyed by document id; element t-1 is chunk t.
using EmbeddingTable = std::map<std::string, std::vector<std::vector<float>>>;

struct EmbedLog {
    std::vector<std::string> oov_chunks;  // "<doc_id>#<index>", replaced by zero vectors
};

inline std::uint64_t stable_hash(std::string_view s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

/// Per-chunk inference seed; independent of iteration order and worker count.
inline std::uint64_t chunk_seed(std::uint64_t seed, std::string_view doc_id, std::size_t index) {
    return mix_seed(seed ^ stable_hash(doc_id), index);
}

/// Embeds every chunk of every document at chunk count n. Chunks without
/// vocabulary words become zero vectors and are listed in the log. Results
/// do not depend on `workers`.
inline EmbeddingTable embed_documents(const PVDMModel& model, std::span<const Document* const> docs, std::size_t n,
                                      std::uint64_t seed, EmbedLog* log = nullptr, std::size_t workers = 1) {
    struct Job {
        const Document* doc;
        Chunk chunk;
        std::vector<float>* out;
        bool oov = false;
    };
    EmbeddingTable table;
    std::vector<Job> jobs;
    for (const Document* d : docs) {
        auto chunks = split_into_chunks(*d, n);
        auto& rows = table[d->id];
        rows.resize(chunks.size());
        for (std::size_t t = 0; t < chunks.size(); ++t) jobs.push_back({d, chunks[t], &rows[t]});
    }
    auto run = [&](std::size_t begin, std::size_t stride) {
        for (std::size_t k = begin; k < jobs.size(); k += stride) {
            auto& job = jobs[k];
            try {
                *job.out = infer_vector(model, job.chunk.tokens, model.config.infer_steps,
                                        chunk_seed(seed, job.doc->id, job.chunk.index));
            } catch (const OutOfVocabulary&) {
                job.out->assign(model.dim(), 0.0f);
                job.oov = true;
            }
        }
    };
    workers = std::max<std::size_t>(1, workers);
    if (workers == 1) {
        run(0, 1);
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run, w, workers);
    }
    if (log) {
        for (const auto& job : jobs)
            if (job.oov) log->oov_chunks.push_back(job.doc->id + "#" + std::to_string(job.chunk.index));
    }
    return table;
}

inline EmbeddingTable embed_corpus(const PVDMModel& model, const Corpus& corpus, std::size_t n, std::uint64_t seed,
                                   EmbedLog* log = nullptr, std::size_t workers = 1) {
    std::vector<const Document*> docs;
    for (const auto& d : corpus.documents) docs.push_back(&d);
    return embed_documents(model, docs, n, seed, log, workers);
}

/// Draws `per_class` training-split documents of every label.
inline std::vector<const Document*> sample_embedding_training_docs(const Corpus& corpus, const DatasetSplit& split,
                                                                   std::size_t per_class, std::uint64_t seed) {
    std::vector<std::vector<const Document*>> by_label(corpus.labels.size());
    for (const auto& id : split.train) {
        const auto& d = corpus.by_id(id);
        by_label[d.label].push_back(&d);
    }
    std::vector<const Document*> out;
    for (std::size_t l = 0; l < by_label.size(); ++l) {
        auto& pool = by_label[l];
        if (pool.size() < per_class)
            throw DataError("label " + corpus.labels.name(l) + " has " + std::to_string(pool.size()) +
                            " training documents, need " + std::to_string(per_class));
        Rng rng(mix_seed(seed, l));
        rng.shuffle(pool);
        out.insert(out.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(per_class));
    }
    return out;
}

// Checkpoint: "PVDM", u32 version, config, vocabulary, then word_in,
// word_out and paragraph matrices as row-major little-endian f32.

inline constexpr std::uint32_t kPvdmVersion = 1;

inline void save_pvdm(const PVDMModel& m, const std::string& path) {
    io::Writer w(path);
    w.magic("PVDM");
    w.put(kPvdmVersion);
    const auto& c = m.config;
    w.put(static_cast<std::uint32_t>(c.dim));
    w.put(static_cast<std::uint32_t>(c.window));
    w.put(static_cast<std::uint32_t>(c.negative));
    w.put(static_cast<std::uint32_t>(c.min_count));
    w.put(static_cast<std::uint32_t>(c.epochs));
    w.put(static_cast<std::uint32_t>(c.infer_steps));
    w.put(c.alpha);
    w.put(c.min_alpha);
    w.put(c.noise_exponent);
    w.put(static_cast<std::uint64_t>(m.vocab.total_tokens()));
    w.put(static_cast<std::uint32_t>(m.vocab.size()));
    for (std::size_t i = 0; i < m.vocab.size(); ++i) {
        w.str(m.vocab.word(i));
        w.put(m.vocab.count(i));
    }
    w.put(static_cast<std::uint32_t>(m.paragraph_ids.size()));
    for (const auto& id : m.paragraph_ids) w.str(id);
    w.array<float>(std::span<const float>(m.word_in));
    w.array<float>(std::span<const float>(m.word_out));
    w.array<float>(std::span<const float>(m.paragraphs));
    w.put(static_cast<std::uint32_t>(m.epoch_loss.size()));
    w.array<double>(std::span<const double>(m.epoch_loss));
    w.finish();
}

inline PVDMModel load_pvdm(const std::string& path) {
    io::Reader r(path);
    r.expect_magic("PVDM");
    if (auto v = r.get<std::uint32_t>(); v != kPvdmVersion)
        throw DataError(path + ": unsupported PVDM version " + std::to_string(v));
    PVDMModel m;
    auto& c = m.config;
    c.dim = r.get<std::uint32_t>();
    c.window = r.get<std::uint32_t>();
    c.negative = r.get<std::uint32_t>();
    c.min_count = r.get<std::uint32_t>();
    c.epochs = r.get<std::uint32_t>();
    c.infer_steps = r.get<std::uint32_t>();
    c.alpha = r.get<double>();
    c.min_alpha = r.get<double>();
    c.noise_exponent = r.get<double>();
    auto total = r.get<std::uint64_t>();
    auto v = r.get<std::uint32_t>();
    std::vector<std::pair<std::string, std::uint64_t>> entries;
    for (std::uint32_t i = 0; i < v; ++i) {
        auto word = r.str();
        auto count = r.get<std::uint64_t>();
        entries.emplace_back(std::move(word), count);
    }
    m.vocab = Vocabulary::restore(std::move(entries), c.min_count, total, c.noise_exponent);
    auto p = r.get<std::uint32_t>();
    for (std::uint32_t i = 0; i < p; ++i) m.paragraph_ids.push_back(r.str());
    m.word_in.resize(static_cast<std::size_t>(v) * c.dim);
    m.word_out.resize(static_cast<std::size_t>(v) * c.dim);
    m.paragraphs.resize(static_cast<std::size_t>(p) * c.dim);
    r.array<float>(std::span<float>(m.word_in));
    r.array<float>(std::span<float>(m.word_out));
    r.array<float>(std::span<float>(m.paragraphs));
    m.epoch_loss.resize(r.get<std::uint32_t>());
    r.array<double>(std::span<double>(m.epoch_loss));
    r.expect_end();
    return m;
}

inline std::string format_float9(float v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(v));
    return buf;
}

/// TSV, one row per chunk: doc_id, chunk index, then the vector components.
inline void write_chunk_embeddings(const EmbeddingTable& table, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write embeddings: " + path.string());
    for (const auto& [id, rows] : table) {
        for (std::size_t t = 0; t < rows.size(); ++t) {
            out << id << '\t' << (t + 1);
            for (float x : rows[t]) out << '\t' << format_float9(x);
            out << '\n';
        }
    }
    if (!out) throw ConfigError("write failed: " + path.string());
}

inline EmbeddingTable read_chunk_embeddings(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("embedding table not found: " + path.string());
    EmbeddingTable table;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream fields(line);
        std::string id, index, cell;
        std::getline(fields, id, '\t');
        std::getline(fields, index, '\t');
        std::vector<float> v;
        while (std::getline(fields, cell, '\t')) v.push_back(std::strtof(cell.c_str(), nullptr));
        auto& rows = table[id];
        if (std::stoul(index) != rows.size() + 1) throw DataError(path.string() + ": chunk rows out of order for " + id);
        rows.push_back(std::move(v));
    }
    return table;
}

}  // namespace longdoc
