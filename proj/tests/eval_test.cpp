#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "longdoc/eval.hpp"
#include "test_util.hpp"

using namespace longdoc;

namespace {

std::size_t class_word_count(const Document& d) {
    return static_cast<std::size_t>(
        std::count_if(d.tokens.begin(), d.tokens.end(), [](const std::string& t) { return t[0] == 'c'; }));
}

// Small enough to train in seconds.
PipelineOptions quick_options() {
    PipelineOptions opt;
    opt.embedder.per_class = 6;
    opt.embedder.pvdm.dim = 16;
    opt.embedder.pvdm.min_count = 1;
    opt.embedder.pvdm.epochs = 10;
    opt.embedder.pvdm.infer_steps = 10;
    opt.aggregator.hidden = 8;
    opt.aggregator.batch = 8;
    opt.aggregator.max_epochs = 5;
    return opt;
}

Corpus quick_corpus() {
    SyntheticSpec spec;
    spec.classes = 3;
    spec.docs_per_class = 12;
    spec.doc_length = 150;
    spec.shared_vocab = 40;
    spec.class_vocab = 10;
    return generate_synthetic_corpus(spec, 3);
}

}  // namespace

TEST(F1, WorkedExample) {
    // gold A A B B, predicted A B B B
    std::vector<std::size_t> gold = {0, 0, 1, 1}, pred = {0, 1, 1, 1};
    auto s = f1_scores(pred, gold, 2);
    EXPECT_NEAR(s.per_class[0].f1, 2.0 / 3.0, 1e-12);
    EXPECT_NEAR(s.per_class[1].f1, 4.0 / 5.0, 1e-12);
    EXPECT_NEAR(s.macro_f1, 11.0 / 15.0, 1e-12);
    EXPECT_NEAR(s.micro_f1, 0.75, 1e-12);
    EXPECT_EQ(s.per_class[0].support, 2u);
    EXPECT_DOUBLE_EQ(s.per_class[0].precision, 1.0);
    EXPECT_DOUBLE_EQ(s.per_class[1].recall, 1.0);
}

TEST(F1, VanishingDenominatorsScoreZero) {
    std::vector<std::size_t> gold = {0, 0, 0}, pred = {0, 0, 0};
    auto s = f1_scores(pred, gold, 3);
    EXPECT_DOUBLE_EQ(s.per_class[0].f1, 1.0);
    EXPECT_DOUBLE_EQ(s.per_class[1].f1, 0.0);
    EXPECT_DOUBLE_EQ(s.per_class[2].precision, 0.0);
    EXPECT_NEAR(s.macro_f1, 1.0 / 3.0, 1e-12);
    std::vector<std::size_t> none;
    EXPECT_THROW(f1_scores(none, none, 2), DataError);
    std::vector<std::size_t> shorter = {0};
    EXPECT_THROW(f1_scores(shorter, gold, 3), DataError);
}

TEST(F1, PermutationInvarianceAndConfusionIdentities) {
    Rng rng(99);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t c = 2 + rng.below(5), n = 1 + rng.below(60);
        std::vector<std::size_t> gold(n), pred(n);
        for (std::size_t i = 0; i < n; ++i) {
            gold[i] = rng.below(c);
            pred[i] = rng.below(3) ? gold[i] : rng.below(c);
        }
        auto s = f1_scores(pred, gold, c);
        std::size_t total = 0, trace = 0;
        for (std::size_t g = 0; g < c; ++g) {
            trace += s.confusion[g][g];
            total += std::accumulate(s.confusion[g].begin(), s.confusion[g].end(), std::size_t{0});
        }
        EXPECT_EQ(total, n);
        EXPECT_EQ(s.total, n);
        EXPECT_DOUBLE_EQ(s.micro_f1, static_cast<double>(trace) / n);
        EXPECT_GE(s.macro_f1, 0.0);
        EXPECT_LE(s.macro_f1, 1.0);

        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
        std::vector<std::size_t> g2, p2;
        for (auto i : order) g2.push_back(gold[i]), p2.push_back(pred[i]);
        auto s2 = f1_scores(p2, g2, c);
        EXPECT_EQ(s2.confusion, s.confusion);
        EXPECT_EQ(s2.macro_f1, s.macro_f1);
    }
}

TEST(EvalReport, RankingJsonAndText) {
    LabelSet labels({"alpha", "beta", "gamma"});
    std::vector<std::size_t> gold = {0, 0, 1, 1, 2, 2}, pred = {0, 0, 1, 0, 0, 0};
    auto r = f1_report(pred, gold, labels, "test", "linear");
    auto rank = r.error_ranking();
    ASSERT_EQ(rank.size(), 3u);
    EXPECT_EQ(rank[0].first, 2u);
    EXPECT_DOUBLE_EQ(rank[0].second, 1.0);
    EXPECT_EQ(rank[1].first, 1u);
    EXPECT_DOUBLE_EQ(rank[1].second, 0.5);
    EXPECT_EQ(rank[2].first, 0u);

    auto j = report_to_json(r);
    EXPECT_EQ(j["split"], "test");
    EXPECT_EQ(j["documents"], 6);
    EXPECT_EQ(j["per_class"].size(), 3u);
    EXPECT_EQ(j["confusion_matrix"][0][0], 2);
    EXPECT_EQ(j["error_ranking"][0]["label"], "gamma");

    auto text = format_report(r);
    EXPECT_NE(text.find("gamma"), std::string::npos);
    EXPECT_NE(text.find("macro-F1"), std::string::npos);
    EXPECT_NE(text.find(percent(r.scores.macro_f1)), std::string::npos);
    EXPECT_EQ(percent(0.5), "50.00");
}

TEST(Exports, EmbeddingTsvRoundTrip) {
    testutil::TempDir dir("eval_export");
    VectorTable v = {{"b/2", {0.5f, -1.25f}}, {"a/1", {1.0f / 3.0f, 2.0f}}, {"c/3", {0.0f, 1e-7f}}};
    std::map<std::string, std::string> labels = {{"a/1", "a"}, {"b/2", "b"}, {"c/3", "c"}};
    export_embeddings(v, labels, dir / "e.tsv");
    auto text = testutil::read_file(dir / "e.tsv");
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 4);
    EXPECT_EQ(text.substr(0, text.find('\n')), "doc_id\tlabel\tv1\tv2");
    EXPECT_EQ(text.find("a/1\ta\t"), text.find('\n') + 1);  // sorted by id

    std::map<std::string, std::string> back_labels;
    auto back = read_embeddings(dir / "e.tsv", &back_labels);
    EXPECT_EQ(back, v);
    EXPECT_EQ(back_labels, labels);
}

TEST(Exports, MeanChunkVectors) {
    EmbeddingTable t = {{"d", {{1.0f, 2.0f}, {3.0f, 6.0f}}}, {"e", {{4.0f, 4.0f}}}};
    auto m = mean_chunk_vectors(t);
    EXPECT_EQ(m["d"], (std::vector<float>{2.0f, 4.0f}));
    EXPECT_EQ(m["e"], (std::vector<float>{4.0f, 4.0f}));
}

TEST(Synthetic, DeterministicAndLabelled) {
    SyntheticSpec spec;
    spec.classes = 3;
    spec.docs_per_class = 4;
    spec.doc_length = 120;
    auto a = generate_synthetic_corpus(spec, 1), b = generate_synthetic_corpus(spec, 1);
    auto c = generate_synthetic_corpus(spec, 2);
    ASSERT_EQ(a.documents.size(), 12u);
    bool differs = false;
    for (std::size_t i = 0; i < a.documents.size(); ++i) {
        EXPECT_EQ(a.documents[i].raw_text, b.documents[i].raw_text);
        differs |= a.documents[i].raw_text != c.documents[i].raw_text;
        const auto& d = a.documents[i];
        EXPECT_EQ(d.tokens.size(), 120u);
        const std::string own = "c" + std::to_string(d.label) + "w";
        for (const auto& t : d.tokens) EXPECT_TRUE(t[0] == 'f' || t.rfind(own, 0) == 0) << t;
    }
    EXPECT_TRUE(differs);
    EXPECT_EQ(a.documents[0].id, "class0/doc0000");
    EXPECT_GT(count_sentences(a.documents[0].raw_text), 0u);
}

TEST(Synthetic, LocalizedSignalIsOneContiguousSpan) {
    SyntheticSpec spec;
    spec.classes = 2;
    spec.docs_per_class = 10;
    spec.doc_length = 333;
    spec.mode = SignalMode::localized;
    auto corpus = generate_synthetic_corpus(spec, 6);
    const std::size_t span = 34;  // ceil(0.1 * 333)
    EXPECT_EQ(localized_span_length(spec), span);
    for (const auto& d : corpus.documents) {
        EXPECT_EQ(class_word_count(d), span) << d.id;
        auto first = std::find_if(d.tokens.begin(), d.tokens.end(), [](const auto& t) { return t[0] == 'c'; });
        ASSERT_NE(first, d.tokens.end());
        EXPECT_TRUE(std::all_of(first, first + span, [](const auto& t) { return t[0] == 'c'; }));
    }
    spec.doc_length = 10;
    EXPECT_EQ(localized_span_length(spec), 1u);
}

TEST(Synthetic, WrittenCorpusLoadsBack) {
    testutil::TempDir dir("eval_write");
    auto corpus = quick_corpus();
    write_corpus(corpus, dir.path());
    auto back = load_corpus(dir.path(), corpus.labels);
    ASSERT_EQ(back.documents.size(), corpus.documents.size());
    for (std::size_t i = 0; i < back.documents.size(); ++i) {
        EXPECT_EQ(back.documents[i].id, corpus.documents[i].id);
        EXPECT_EQ(back.documents[i].tokens, corpus.documents[i].tokens);
    }
}

TEST(Sweep, TsvRoundTripAndSummary) {
    std::vector<SweepRow> rows = {
        {1, 150.0, "linear", 1, 0.5, 0.25, false},
        {1, 150.0, "linear", 2, 0.75, 1.0 / 3.0, false},
        {1, 150.0, "linear", 3, 0.0, 0.0, true},
        {3, 50.0, "svm", 1, 0.1, 0.2, false},
    };
    auto tsv = sweep_to_tsv(rows);
    EXPECT_EQ(tsv.substr(0, tsv.find('\n')), kSweepHeader);
    EXPECT_NE(tsv.find("NA\tNA"), std::string::npos);
    EXPECT_EQ(sweep_from_tsv(tsv), rows);
    EXPECT_THROW(sweep_from_tsv("wrong\n"), DataError);

    auto summary = summarize_sweep(rows);
    ASSERT_EQ(summary.size(), 2u);
    EXPECT_EQ(summary[0].runs, 2u);
    EXPECT_DOUBLE_EQ(summary[0].median_test, 0.5 * (0.25 + 1.0 / 3.0));
    EXPECT_DOUBLE_EQ(summary[0].min_test, 0.25);
    EXPECT_EQ(summary[1].classifier, "svm");
    EXPECT_NE(format_sweep(summary).find("3-chunk"), std::string::npos);
    EXPECT_DOUBLE_EQ(median({3.0, 1.0, 2.0}), 2.0);
}

TEST(Pipeline, EndToEndOnTinyCorpus) {
    auto corpus = quick_corpus();
    auto split = split_dataset(corpus, 4);
    auto opt = quick_options();
    opt.train_svm = true;
    auto p = train_pipeline(corpus, split, 3, opt, 21);
    EXPECT_EQ(p.embeddings.size(), corpus.documents.size());
    for (const auto& [id, rows] : p.embeddings) EXPECT_EQ(rows.size(), 3u) << id;
    ASSERT_TRUE(p.svm.has_value());

    for (const auto* ids : {&split.validation, &split.test}) {
        auto lin = evaluate_linear(p.aggregator.model, corpus, *ids, p.embeddings, "x");
        auto svm = evaluate_svm(*p.svm, p.aggregator.model, corpus, *ids, p.embeddings, "x");
        EXPECT_EQ(lin.scores.total, ids->size());
        EXPECT_EQ(svm.scores.total, ids->size());
    }
    auto again = train_pipeline(corpus, split, 3, opt, 21);
    EXPECT_EQ(again.embeddings, p.embeddings);
    EXPECT_EQ(again.aggregator.model.params, p.aggregator.model.params);

    auto vecs = document_vectors(p.aggregator.model, p.embeddings);
    EXPECT_EQ(vecs.size(), corpus.documents.size());
    EXPECT_EQ(vecs.begin()->second.size(), 2 * opt.aggregator.hidden);
}

TEST(Sweep, RowsPerCellAndFailedCellsContinue) {
    auto corpus = quick_corpus();
    auto split = split_dataset(corpus, 4);
    auto opt = quick_options();
    auto rows = run_chunk_sweep(corpus, split, {1, 2}, ClassifierKind::both, {5}, opt);
    ASSERT_EQ(rows.size(), 4u);
    EXPECT_EQ(rows[0].n_chunks, 1u);
    EXPECT_EQ(rows[0].classifier, "linear");
    EXPECT_EQ(rows[1].classifier, "svm");
    EXPECT_DOUBLE_EQ(rows[0].w_c, 150.0);
    EXPECT_DOUBLE_EQ(rows[2].w_c, 75.0);
    for (const auto& r : rows) EXPECT_FALSE(r.failed);

    // An embedder that cannot train makes the cell fail without aborting.
    opt.embedder.pvdm.min_count = 1000000;
    std::ostringstream log;
    auto bad = run_chunk_sweep(corpus, split, {1}, ClassifierKind::linear, {5, 6}, opt, &log);
    ASSERT_EQ(bad.size(), 2u);
    EXPECT_TRUE(bad[0].failed);
    EXPECT_TRUE(bad[1].failed);
    EXPECT_NE(log.str().find("failed"), std::string::npos);
}
