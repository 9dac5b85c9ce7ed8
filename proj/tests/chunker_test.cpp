#include <gtest/gtest.h>

#include "longdoc/chunker.hpp"
#include "longdoc/random.hpp"

using namespace longdoc;

namespace {

Tokens numbered(std::size_t n) {
    Tokens t;
    for (std::size_t i = 0; i < n; ++i) t.push_back("t" + std::to_string(i));
    return t;
}

Document doc_of(const std::string& id, std::size_t len) {
    Document d;
    d.id = id;
    d.tokens = numbered(len);
    return d;
}

}  // namespace

TEST(ChunkLengths, Examples) {
    EXPECT_EQ(chunk_lengths(12, 3), (std::vector<std::size_t>{4, 4, 4}));
    EXPECT_EQ(chunk_lengths(10, 3), (std::vector<std::size_t>{4, 3, 3}));
    EXPECT_EQ(chunk_lengths(3, 50), (std::vector<std::size_t>{1, 1, 1}));
    EXPECT_THROW(chunk_lengths(0, 3), DataError);
    EXPECT_THROW(chunk_lengths(5, 0), ConfigError);
}

TEST(SplitIntoChunks, SingleChunkIsIdentity) {
    auto tokens = numbered(17);
    auto chunks = split_into_chunks(std::span<const std::string>(tokens), 1, "doc");
    ASSERT_EQ(chunks.size(), 1u);
    EXPECT_EQ(chunks[0].index, 1u);
    EXPECT_EQ(chunks[0].doc_id, "doc");
    EXPECT_TRUE(std::equal(tokens.begin(), tokens.end(), chunks[0].tokens.begin(), chunks[0].tokens.end()));
}

TEST(SplitIntoChunks, EmptyDocumentIsAnError) {
    Tokens none;
    EXPECT_THROW(split_into_chunks(std::span<const std::string>(none), 3), DataError);
}

TEST(SplitIntoChunks, PartitionProperty) {
    Rng rng(2024);
    const std::size_t ns[] = {1, 3, 5, 7, 10, 25, 50};
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t len = 1 + rng.below(400);
        const std::size_t n = ns[rng.below(7)];
        auto tokens = numbered(len);
        auto chunks = split_into_chunks(std::span<const std::string>(tokens), n);
        ASSERT_EQ(chunks.size(), std::min(n, len));
        Tokens joined;
        std::size_t lo = len, hi = 0;
        for (std::size_t i = 0; i < chunks.size(); ++i) {
            EXPECT_EQ(chunks[i].index, i + 1);
            joined.insert(joined.end(), chunks[i].tokens.begin(), chunks[i].tokens.end());
            lo = std::min(lo, chunks[i].tokens.size());
            hi = std::max(hi, chunks[i].tokens.size());
            if (i > 0) {
                EXPECT_LE(chunks[i].tokens.size(), chunks[i - 1].tokens.size());
            }
        }
        ASSERT_EQ(joined, tokens);
        EXPECT_LE(hi - lo, 1u);
        EXPECT_GE(lo, 1u);
    }
}

TEST(MeanWordsPerChunk, Arithmetic) {
    Corpus one;
    one.documents.push_back(doc_of("a", 100));
    EXPECT_DOUBLE_EQ(mean_words_per_chunk(one, 5), 20.0);

    Corpus two;
    two.documents.push_back(doc_of("a", 30));
    two.documents.push_back(doc_of("b", 10));
    EXPECT_DOUBLE_EQ(mean_words_per_chunk(two, 10), 2.0);  // 40 tokens / 20 chunks
    EXPECT_DOUBLE_EQ(mean_words_per_chunk(two, 1), 20.0);  // mean document length
    EXPECT_DOUBLE_EQ(mean_words_per_chunk(two, 50), 1.0);  // every token its own chunk

    EXPECT_THROW(mean_words_per_chunk(Corpus{}, 3), DataError);
    EXPECT_THROW(mean_words_per_chunk(two, 0), ConfigError);
}
