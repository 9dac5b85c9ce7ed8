#pragma once

// Evaluation reports, embedding exports, synthetic corpora, the staged
// end-to-end pipeline and the chunk-count sweep.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "longdoc/aggregator.hpp"
#include "longdoc/chunker.hpp"
#include "longdoc/config.hpp"
#include "longdoc/corpus.hpp"
#include "longdoc/embedder.hpp"
#include "longdoc/errors.hpp"
#include "longdoc/metrics.hpp"
#include "longdoc/random.hpp"
#include "longdoc/svm.hpp"

namespace longdoc {

// ---------------------------------------------------------------- reports

struct EvalReport {
    std::string split;
    std::string classifier;
    LabelSet labels;
    F1Scores scores;

    /// Classes ordered by error rate (1 - recall), worst first; ties by index.
    std::vector<std::pair<std::size_t, double>> error_ranking() const {
        std::vector<std::pair<std::size_t, double>> out;
        for (std::size_t k = 0; k < scores.per_class.size(); ++k) {
            const auto& cs = scores.per_class[k];
            out.emplace_back(k, cs.support ? 1.0 - cs.recall : 0.0);
        }
        std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
        return out;
    }
};

inline EvalReport f1_report(std::span<const std::size_t> predicted, std::span<const std::size_t> gold,
                            const LabelSet& labels, std::string split = {}, std::string classifier = {}) {
    return {std::move(split), std::move(classifier), labels, f1_scores(predicted, gold, labels.size())};
}

inline nlohmann::ordered_json report_to_json(const EvalReport& r) {
    nlohmann::ordered_json j;
    j["split"] = r.split;
    j["classifier"] = r.classifier;
    j["labels"] = r.labels.names();
    j["documents"] = r.scores.total;
    j["macro_f1"] = r.scores.macro_f1;
    j["micro_f1"] = r.scores.micro_f1;
    auto per = nlohmann::ordered_json::array();
    for (std::size_t k = 0; k < r.scores.per_class.size(); ++k) {
        const auto& cs = r.scores.per_class[k];
        per.push_back({{"label", r.labels.name(k)},
                       {"precision", cs.precision},
                       {"recall", cs.recall},
                       {"f1", cs.f1},
                       {"support", cs.support}});
    }
    j["per_class"] = per;
    j["confusion_matrix"] = r.scores.confusion;
    auto ranking = nlohmann::ordered_json::array();
    for (auto [k, rate] : r.error_ranking()) ranking.push_back({{"label", r.labels.name(k)}, {"error_rate", rate}});
    j["error_ranking"] = ranking;
    return j;
}

inline std::string percent(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", 100.0 * v);
    return buf;
}

/// Aligned-column text rendering; F1 values as percentages.
inline std::string format_report(const EvalReport& r) {
    std::ostringstream os;
    char line[256];
    os << "split: " << r.split << "  classifier: " << r.classifier << "  documents: " << r.scores.total << '\n';
    std::snprintf(line, sizeof line, "%-16s %10s %10s %10s %8s\n", "label", "precision", "recall", "F1", "support");
    os << line;
    for (std::size_t k = 0; k < r.scores.per_class.size(); ++k) {
        const auto& cs = r.scores.per_class[k];
        std::snprintf(line, sizeof line, "%-16s %10s %10s %10s %8zu\n", r.labels.name(k).c_str(),
                      percent(cs.precision).c_str(), percent(cs.recall).c_str(), percent(cs.f1).c_str(), cs.support);
        os << line;
    }
    os << "macro-F1 " << percent(r.scores.macro_f1) << "  micro-F1 " << percent(r.scores.micro_f1) << "\n\n";
    os << "confusion matrix (rows gold, columns predicted)\n";
    std::snprintf(line, sizeof line, "%-16s", "");
    os << line;
    for (const auto& name : r.labels.names()) {
        std::snprintf(line, sizeof line, " %10s", name.c_str());
        os << line;
    }
    os << '\n';
    for (std::size_t g = 0; g < r.scores.confusion.size(); ++g) {
        std::snprintf(line, sizeof line, "%-16s", r.labels.name(g).c_str());
        os << line;
        for (auto v : r.scores.confusion[g]) {
            std::snprintf(line, sizeof line, " %10zu", v);
            os << line;
        }
        os << '\n';
    }
    os << "\nmost misclassified:";
    for (auto [k, rate] : r.error_ranking()) os << ' ' << r.labels.name(k) << '(' << percent(rate) << ')';
    os << '\n';
    return os.str();
}

// ---------------------------------------------------------------- exports

using VectorTable = std::map<std::string, std::vector<float>>;

/// TSV with header `doc_id label v1 .. vd`, rows sorted by doc_id.
inline void export_embeddings(const VectorTable& vectors, const std::map<std::string, std::string>& labels,
                              const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write embeddings: " + path.string());
    const std::size_t dim = vectors.empty() ? 0 : vectors.begin()->second.size();
    out << "doc_id\tlabel";
    for (std::size_t k = 1; k <= dim; ++k) out << "\tv" << k;
    out << '\n';
    for (const auto& [id, v] : vectors) {
        auto it = labels.find(id);
        out << id << '\t' << (it == labels.end() ? std::string() : it->second);
        for (float x : v) out << '\t' << format_float9(x);
        out << '\n';
    }
    if (!out) throw ConfigError("write failed: " + path.string());
}

inline VectorTable read_embeddings(const std::filesystem::path& path, std::map<std::string, std::string>* labels = nullptr) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("embedding export not found: " + path.string());
    VectorTable out;
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream fields(line);
        std::string id, label, cell;
        std::getline(fields, id, '\t');
        std::getline(fields, label, '\t');
        std::vector<float> v;
        while (std::getline(fields, cell, '\t')) v.push_back(std::strtof(cell.c_str(), nullptr));
        if (labels) (*labels)[id] = label;
        out[id] = std::move(v);
    }
    return out;
}

/// Pre-aggregation document embedding: mean of the chunk vectors.
inline VectorTable mean_chunk_vectors(const EmbeddingTable& table) {
    VectorTable out;
    for (const auto& [id, rows] : table) {
        std::vector<float> mean(rows.front().size(), 0.0f);
        for (const auto& r : rows)
            for (std::size_t k = 0; k < r.size(); ++k) mean[k] += r[k];
        for (auto& x : mean) x /= static_cast<float>(rows.size());
        out[id] = std::move(mean);
    }
    return out;
}

// ---------------------------------------------------------------- synthetic

enum class SignalMode { global, localized };

struct SyntheticSpec {
    std::size_t classes = 5;
    std::size_t docs_per_class = 200;
    std::size_t doc_length = 2000;
    std::size_t shared_vocab = 500;  // class-neutral filler words
    std::size_t class_vocab = 50;    // words private to each class
    SignalMode mode = SignalMode::global;
    double signal_rate = 0.3;        // global: probability a token is a class word
    double span_fraction = 0.1;      // localized: fraction of tokens in the signal span
    std::size_t sentence_length = 15;
    std::size_t line_length = 12;    // words per physical line
};

inline std::size_t localized_span_length(const SyntheticSpec& spec) {
    return static_cast<std::size_t>(std::ceil(spec.span_fraction * static_cast<double>(spec.doc_length) - 1e-9));
}

/// Labels are `class0..`, ids `<label>/doc0000..`. In global mode each token
/// is a class word with probability signal_rate (always, if there is no
/// shared vocabulary). In localized mode class words fill exactly one
/// contiguous span of ceil(span_fraction * length) tokens at a random offset
/// and filler is used everywhere else.
inline Corpus generate_synthetic_corpus(const SyntheticSpec& spec, std::uint64_t seed) {
    if (spec.classes < 2 || spec.docs_per_class == 0 || spec.doc_length == 0 || spec.class_vocab == 0)
        throw ConfigError("synthetic corpus spec has an empty dimension");
    if (spec.mode == SignalMode::localized && spec.shared_vocab == 0)
        throw ConfigError("localized corpora need filler vocabulary");
    std::vector<std::string> names;
    for (std::size_t k = 0; k < spec.classes; ++k) names.push_back("class" + std::to_string(k));
    Corpus corpus;
    corpus.labels = LabelSet(names);
    Rng rng(seed);
    for (std::size_t k = 0; k < spec.classes; ++k) {
        for (std::size_t d = 0; d < spec.docs_per_class; ++d) {
            const std::size_t L = spec.doc_length;
            std::vector<bool> signal(L, false);
            if (spec.mode == SignalMode::global) {
                for (std::size_t t = 0; t < L; ++t) signal[t] = spec.shared_vocab == 0 || rng.uniform() < spec.signal_rate;
            } else {
                const std::size_t span = std::min(L, localized_span_length(spec));
                const std::size_t start = rng.below(L - span + 1);
                for (std::size_t t = start; t < start + span; ++t) signal[t] = true;
            }
            std::string text;
            for (std::size_t t = 0; t < L; ++t) {
                if (signal[t]) text += "c" + std::to_string(k) + "w" + std::to_string(rng.below(spec.class_vocab));
                else text += "f" + std::to_string(rng.below(spec.shared_vocab));
                if ((t + 1) % spec.sentence_length == 0 || t + 1 == L) text += '.';
                text += (t + 1) % spec.line_length == 0 ? '\n' : ' ';
            }
            char id[64];
            std::snprintf(id, sizeof id, "%s/doc%04zu", names[k].c_str(), d);
            Document doc;
            corpus.make_document(id, k, std::move(text), doc);
            corpus.documents.push_back(std::move(doc));
        }
    }
    corpus.sort();
    return corpus;
}

/// Writes `<root>/<label>/<stem>.txt` for every document.
inline void write_corpus(const Corpus& corpus, const std::filesystem::path& root) {
    namespace fs = std::filesystem;
    for (const auto& name : corpus.labels.names()) fs::create_directories(root / name);
    for (const auto& d : corpus.documents) {
        fs::path file = root / (d.id + ".txt");
        std::ofstream out(file, std::ios::binary | std::ios::trunc);
        if (!out) throw ConfigError("cannot write " + file.string());
        out << d.raw_text;
    }
}

// ---------------------------------------------------------------- pipeline

// Seed streams derived from the run seed.
inline constexpr std::uint64_t kSampleStream = 11;
inline constexpr std::uint64_t kPvdmStream = 12;
inline constexpr std::uint64_t kInferStream = 13;
inline constexpr std::uint64_t kAggregatorStream = 14;

inline LabeledSequences<float> sequences_for(const Corpus& corpus, const std::vector<std::string>& ids,
                                             const EmbeddingTable& table, std::size_t n_chunks) {
    LabeledSequences<float> out;
    for (const auto& id : ids) {
        auto it = table.find(id);
        if (it == table.end()) throw DataError("no embeddings for document " + id);
        out.sequences.push_back(Sequence<float>::from_rows(it->second, n_chunks));
        out.labels.push_back(corpus.by_id(id).label);
    }
    return out;
}

inline PointSet doc_vector_points(const AggregatorModel<float>& agg, const LabeledSequences<float>& data) {
    PointSet pts;
    pts.dim = agg.dims.doc_dim();
    for (const auto& s : data.sequences) {
        auto d = document_vector(agg, s);
        std::vector<double> p(d.begin(), d.end());
        pts.push(p);
    }
    return pts;
}

inline std::vector<std::size_t> predict_svm_labels(const SVMModel& svm, const PointSet& pts) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < pts.size(); ++i) out.push_back(svm.predict(pts.row(i)));
    return out;
}

struct EmbedderResult {
    PVDMModel model;
    std::size_t skipped_training_chunks = 0;
};

/// Trains the paragraph-vector model on the chunks of `per_class` sampled
/// training documents per label. Chunks left without vocabulary words after
/// min_count filtering are dropped from training.
inline EmbedderResult train_embedder(const Corpus& corpus, const DatasetSplit& split, const EmbedderSettings& settings,
                                     std::size_t n_chunks, std::uint64_t seed) {
    auto docs = sample_embedding_training_docs(corpus, split, settings.per_class, mix_seed(seed, kSampleStream));
    std::vector<Chunk> chunks;
    for (const Document* d : docs) {
        auto c = split_into_chunks(*d, n_chunks);
        chunks.insert(chunks.end(), c.begin(), c.end());
    }
    auto vocab = build_vocab(chunks, settings.pvdm.min_count, settings.pvdm.noise_exponent);
    EmbedderResult res;
    std::vector<Chunk> usable;
    for (const auto& c : chunks) {
        bool any = std::any_of(c.tokens.begin(), c.tokens.end(), [&](const auto& t) { return vocab.find(t).has_value(); });
        if (any) usable.push_back(c);
        else ++res.skipped_training_chunks;
    }
    res.model = train_pvdm(usable, vocab, settings.pvdm, mix_seed(seed, kPvdmStream));
    return res;
}

/// SVM on document vectors. With a configured grid, (gamma, C) is chosen by
/// validation macro-F1, first best in grid order.
inline SVMModel train_svm_head(const AggregatorModel<float>& agg, const LabeledSequences<float>& train,
                               const LabeledSequences<float>& validation, const SvmSettings& settings) {
    auto train_pts = doc_vector_points(agg, train);
    const std::size_t c = agg.labels.size();
    if (settings.gamma_grid.empty() && settings.c_grid.empty())
        return train_multiclass_svm(train_pts, train.labels, c, settings.svm);
    auto gammas = settings.gamma_grid.empty() ? std::vector<double>{settings.svm.gamma} : settings.gamma_grid;
    auto cs = settings.c_grid.empty() ? std::vector<double>{settings.svm.C} : settings.c_grid;
    auto val_pts = doc_vector_points(agg, validation);
    std::optional<SVMModel> best;
    double best_f1 = -1.0;
    for (double g : gammas) {
        for (double cv : cs) {
            SVMConfig cfg = settings.svm;
            cfg.gamma = g;
            cfg.C = cv;
            auto m = train_multiclass_svm(train_pts, train.labels, c, cfg);
            double f1 = validation.sequences.empty() ? 0.0 : macro_f1(predict_svm_labels(m, val_pts), validation.labels, c);
            if (f1 > best_f1) {
                best_f1 = f1;
                best = std::move(m);
            }
        }
    }
    return *best;
}

struct TrainedPipeline {
    std::size_t n_chunks = 1;
    PVDMModel pvdm;
    EmbeddingTable embeddings;
    EmbedLog embed_log;
    std::size_t skipped_training_chunks = 0;
    TrainResult<float> aggregator;
    std::optional<SVMModel> svm;
};

struct PipelineOptions {
    EmbedderSettings embedder;
    AggregatorConfig aggregator;
    SvmSettings svm;
    bool train_svm = false;
    std::size_t workers = 1;
};

inline PipelineOptions options_from(const PipelineConfig& c) {
    return {c.embedder, c.aggregator, c.svm, wants_svm(c.classifier), c.workers};
}

/// Embedder -> chunk embeddings -> aggregator (-> SVM on document vectors).
inline TrainedPipeline train_pipeline(const Corpus& corpus, const DatasetSplit& split, std::size_t n_chunks,
                                      const PipelineOptions& opt, std::uint64_t seed) {
    TrainedPipeline p;
    p.n_chunks = n_chunks;
    auto emb = train_embedder(corpus, split, opt.embedder, n_chunks, seed);
    p.pvdm = std::move(emb.model);
    p.skipped_training_chunks = emb.skipped_training_chunks;
    p.embeddings = embed_corpus(p.pvdm, corpus, n_chunks, mix_seed(seed, kInferStream), &p.embed_log, opt.workers);
    auto train = sequences_for(corpus, split.train, p.embeddings, n_chunks);
    auto val = sequences_for(corpus, split.validation, p.embeddings, n_chunks);
    p.aggregator = train_aggregator(train, val, corpus.labels, n_chunks, opt.aggregator, mix_seed(seed, kAggregatorStream));
    if (opt.train_svm) p.svm = train_svm_head(p.aggregator.model, train, val, opt.svm);
    return p;
}

inline EvalReport evaluate_linear(const AggregatorModel<float>& agg, const Corpus& corpus,
                                  const std::vector<std::string>& ids, const EmbeddingTable& table,
                                  const std::string& split_name) {
    auto data = sequences_for(corpus, ids, table, agg.n_chunks);
    return f1_report(predict_labels(agg, data), data.labels, corpus.labels, split_name, "linear");
}

inline EvalReport evaluate_svm(const SVMModel& svm, const AggregatorModel<float>& agg, const Corpus& corpus,
                               const std::vector<std::string>& ids, const EmbeddingTable& table,
                               const std::string& split_name) {
    auto data = sequences_for(corpus, ids, table, agg.n_chunks);
    return f1_report(predict_svm_labels(svm, doc_vector_points(agg, data)), data.labels, corpus.labels, split_name,
                     "svm");
}

inline VectorTable document_vectors(const AggregatorModel<float>& agg, const EmbeddingTable& table) {
    VectorTable out;
    for (const auto& [id, rows] : table) out[id] = document_vector(agg, Sequence<float>::from_rows(rows, agg.n_chunks));
    return out;
}

// ---------------------------------------------------------------- sweep

struct SweepRow {
    std::size_t n_chunks = 1;
    double w_c = 0.0;
    std::string classifier;
    std::uint64_t seed = 0;
    double val_f1 = 0.0;
    double test_f1 = 0.0;
    bool failed = false;

    friend bool operator==(const SweepRow&, const SweepRow&) = default;
};

/// Every (n, seed) cell trains one pipeline and yields a row per requested
/// classifier. A failing cell produces failed rows and the sweep continues.
/// Rows are sorted by n, then classifier, then seed.
inline std::vector<SweepRow> run_chunk_sweep(const Corpus& corpus, const DatasetSplit& split,
                                             const std::vector<std::size_t>& n_list, ClassifierKind kinds,
                                             const std::vector<std::uint64_t>& seeds, PipelineOptions opt,
                                             std::ostream* log = nullptr) {
    std::vector<SweepRow> rows;
    opt.train_svm = wants_svm(kinds);
    for (std::size_t n : n_list) {
        const double w_c = mean_words_per_chunk(corpus, n);
        for (std::uint64_t seed : seeds) {
            std::vector<SweepRow> cell;
            if (wants_linear(kinds)) cell.push_back({n, w_c, "linear", seed, 0.0, 0.0, false});
            if (wants_svm(kinds)) cell.push_back({n, w_c, "svm", seed, 0.0, 0.0, false});
            try {
                auto p = train_pipeline(corpus, split, n, opt, seed);
                const auto& agg = p.aggregator.model;
                for (auto& r : cell) {
                    if (r.classifier == "linear") {
                        r.val_f1 = evaluate_linear(agg, corpus, split.validation, p.embeddings, "validation").scores.macro_f1;
                        r.test_f1 = evaluate_linear(agg, corpus, split.test, p.embeddings, "test").scores.macro_f1;
                    } else {
                        r.val_f1 = evaluate_svm(*p.svm, agg, corpus, split.validation, p.embeddings, "validation").scores.macro_f1;
                        r.test_f1 = evaluate_svm(*p.svm, agg, corpus, split.test, p.embeddings, "test").scores.macro_f1;
                    }
                }
            } catch (const std::exception& e) {
                if (log) *log << "sweep cell n=" << n << " seed=" << seed << " failed: " << e.what() << '\n';
                for (auto& r : cell) r.failed = true;
            }
            if (log) {
                for (const auto& r : cell)
                    if (!r.failed)
                        *log << "n=" << n << " " << r.classifier << " seed=" << seed << " val=" << percent(r.val_f1)
                             << " test=" << percent(r.test_f1) << '\n';
            }
            rows.insert(rows.end(), cell.begin(), cell.end());
        }
    }
    std::stable_sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) {
        if (a.n_chunks != b.n_chunks) return a.n_chunks < b.n_chunks;
        if (a.classifier != b.classifier) return a.classifier < b.classifier;
        return a.seed < b.seed;
    });
    return rows;
}

inline constexpr const char* kSweepHeader = "n_chunks\tW_c\tclassifier\tseed\tval_f1\ttest_f1";

inline std::string format_exact(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// F1 values are fractions at full precision; failed cells hold `NA`.
inline std::string sweep_to_tsv(const std::vector<SweepRow>& rows) {
    std::ostringstream os;
    os << kSweepHeader << '\n';
    for (const auto& r : rows) {
        os << r.n_chunks << '\t' << format_exact(r.w_c) << '\t' << r.classifier << '\t' << r.seed << '\t'
           << (r.failed ? "NA" : format_exact(r.val_f1)) << '\t' << (r.failed ? "NA" : format_exact(r.test_f1))
           << '\n';
    }
    return os.str();
}

inline std::vector<SweepRow> sweep_from_tsv(std::string_view text) {
    std::istringstream in{std::string(text)};
    std::string line;
    if (!std::getline(in, line) || line != kSweepHeader) throw DataError("sweep TSV has an unexpected header");
    std::vector<SweepRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream f(line);
        std::string n, wc, cls, seed, val, test;
        if (!std::getline(f, n, '\t') || !std::getline(f, wc, '\t') || !std::getline(f, cls, '\t') ||
            !std::getline(f, seed, '\t') || !std::getline(f, val, '\t') || !std::getline(f, test, '\t'))
            throw DataError("malformed sweep row: " + line);
        SweepRow r;
        r.n_chunks = std::stoul(n);
        r.w_c = std::strtod(wc.c_str(), nullptr);
        r.classifier = cls;
        r.seed = std::stoull(seed);
        r.failed = val == "NA";
        if (!r.failed) {
            r.val_f1 = std::strtod(val.c_str(), nullptr);
            r.test_f1 = std::strtod(test.c_str(), nullptr);
        }
        rows.push_back(r);
    }
    return rows;
}

struct SweepSummary {
    std::size_t n_chunks = 1;
    double w_c = 0.0;
    std::string classifier;
    std::size_t runs = 0;
    double median_val = 0.0, median_test = 0.0;
    double min_test = 0.0, max_test = 0.0;
};

inline double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

/// Median and range over seeds per (n, classifier), skipping failed rows.
inline std::vector<SweepSummary> summarize_sweep(const std::vector<SweepRow>& rows) {
    std::map<std::pair<std::size_t, std::string>, std::vector<const SweepRow*>> groups;
    for (const auto& r : rows)
        if (!r.failed) groups[{r.n_chunks, r.classifier}].push_back(&r);
    std::vector<SweepSummary> out;
    for (const auto& [key, g] : groups) {
        SweepSummary s;
        s.n_chunks = key.first;
        s.classifier = key.second;
        s.w_c = g.front()->w_c;
        s.runs = g.size();
        std::vector<double> val, test;
        for (const auto* r : g) {
            val.push_back(r->val_f1);
            test.push_back(r->test_f1);
        }
        s.median_val = median(val);
        s.median_test = median(test);
        s.min_test = *std::min_element(test.begin(), test.end());
        s.max_test = *std::max_element(test.begin(), test.end());
        out.push_back(s);
    }
    return out;
}

/// One line per (n, head): median test and validation F1 in percent, test range.
inline std::string format_sweep(const std::vector<SweepSummary>& summary) {
    std::ostringstream os;
    char line[200];
    std::snprintf(line, sizeof line, "%-10s %-8s %10s %10s %10s %16s %5s\n", "model", "head", "W_c", "Test.F1",
                  "Val.F1", "test range", "runs");
    os << line;
    for (const auto& s : summary) {
        std::string model = std::to_string(s.n_chunks) + "-chunk";
        std::string range = percent(s.min_test) + "-" + percent(s.max_test);
        std::snprintf(line, sizeof line, "%-10s %-8s %10.0f %10s %10s %16s %5zu\n", model.c_str(),
                      s.classifier.c_str(), s.w_c, percent(s.median_test).c_str(), percent(s.median_val).c_str(),
                      range.c_str(), s.runs);
        os << line;
    }
    return os.str();
}

}  // namespace longdoc
