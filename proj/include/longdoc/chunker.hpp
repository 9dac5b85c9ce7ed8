#pragma once

// Contiguous, token-balanced document segmentation.

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "longdoc/corpus.hpp"
#include "longdoc/errors.hpp"

namespace longdoc {

struct ChunkingConfig {
    std::size_t n_chunks = 1;
};

struct Chunk {
    std::string doc_id;
    std::size_t index = 1;  // 1-based position within the document
    std::span<const std::string> tokens;
};

/// Token counts of each chunk. With m = min(n, L) chunks, the first L mod m
/// get ceil(L/m) tokens and the rest floor(L/m).
inline std::vector<std::size_t> chunk_lengths(std::size_t length, std::size_t n) {
    if (n == 0) throw ConfigError("chunk count must be at least 1");
    if (length == 0) throw DataError("cannot chunk an empty document");
    const std::size_t m = std::min(n, length);
    const std::size_t base = length / m;
    const std::size_t extra = length % m;
    std::vector<std::size_t> out(m, base);
    for (std::size_t i = 0; i < extra; ++i) ++out[i];
    return out;
}

/// Splits into views over `tokens`; the returned chunks must not outlive it.
inline std::vector<Chunk> split_into_chunks(std::span<const std::string> tokens, std::size_t n,
                                            const std::string& doc_id = {}) {
    auto lengths = chunk_lengths(tokens.size(), n);
    std::vector<Chunk> out;
    out.reserve(lengths.size());
    std::size_t offset = 0;
    for (std::size_t i = 0; i < lengths.size(); ++i) {
        out.push_back({doc_id, i + 1, tokens.subspan(offset, lengths[i])});
        offset += lengths[i];
    }
    return out;
}

inline std::vector<Chunk> split_into_chunks(const Document& doc, std::size_t n) {
    return split_into_chunks(std::span<const std::string>(doc.tokens), n, doc.id);
}

/// Mean words per chunk, Σ tokens / Σ chunks over the corpus.
inline double mean_words_per_chunk(const Corpus& corpus, std::size_t n) {
    if (corpus.documents.empty()) throw DataError("mean_words_per_chunk on an empty corpus");
    if (n == 0) throw ConfigError("chunk count must be at least 1");
    std::size_t tokens = 0;
    std::size_t chunks = 0;
    for (const auto& d : corpus.documents) {
        tokens += d.tokens.size();
        chunks += std::min(n, d.tokens.size());
    }
    return static_cast<double>(tokens) / static_cast<double>(chunks);
}

}  // namespace longdoc
