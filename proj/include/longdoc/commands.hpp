#pragma once

// Batch commands behind the `longdoc` CLI. Every artifact goes under
// `<output>/<run_name>/`; the resolved config is written there as well.

#include <fcntl.h>
#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "json.hpp"
#include "longdoc/config.hpp"
#include "longdoc/eval.hpp"

namespace longdoc {

namespace files {
inline constexpr const char* kConfig = "config.json";
inline constexpr const char* kSplit = "split.json";
inline constexpr const char* kStats = "stats.txt";
inline constexpr const char* kPvdm = "pvdm.bin";
inline constexpr const char* kAggregator = "aggregator.bin";
inline constexpr const char* kSvm = "svm.bin";
inline constexpr const char* kTrainLog = "train_log.jsonl";
inline constexpr const char* kChunkEmbeddings = "chunk_embeddings.tsv";
inline constexpr const char* kDocVectors = "doc_vectors.tsv";
inline constexpr const char* kMeanChunkVectors = "mean_chunk_vectors.tsv";
inline constexpr const char* kFailed = "FAILED";
inline constexpr const char* kSweep = "sweep.tsv";
inline constexpr const char* kSweepSummary = "sweep_summary.txt";
}  // namespace files

/// Advisory lock on a run directory, held for the lifetime of the object.
class RunLock {
public:
    explicit RunLock(const std::filesystem::path& run_dir) : path_(run_dir / ".lock") {
        std::filesystem::create_directories(run_dir);
        fd_ = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
        if (fd_ < 0)
            throw ConfigError("run directory is locked by another command (remove " + path_.string() +
                              " if no command is running)");
    }
    RunLock(const RunLock&) = delete;
    RunLock& operator=(const RunLock&) = delete;
    ~RunLock() {
        ::close(fd_);
        std::error_code ec;
        std::filesystem::remove(path_, ec);
    }

private:
    std::filesystem::path path_;
    int fd_ = -1;
};

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << text;
    if (!out) throw ConfigError("write failed: " + path.string());
}

inline std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

/// Fills in labels discovered from the corpus root when none are configured.
inline PipelineConfig resolve_config(PipelineConfig cfg) {
    if (cfg.corpus_root.empty()) throw ConfigError("config has no corpus_root");
    if (!std::filesystem::is_directory(cfg.corpus_root))
        throw ConfigError("corpus directory not found: " + cfg.corpus_root);
    if (cfg.labels.empty()) cfg.labels = discover_labels(cfg.corpus_root);
    validate(cfg);
    return cfg;
}

inline Corpus load_configured_corpus(const PipelineConfig& cfg, std::ostream& err) {
    auto corpus = load_corpus(cfg.corpus_root, LabelSet(cfg.labels), cfg.boilerplate_set());
    print_load_report(corpus.report, err);
    if (corpus.documents.empty()) throw DataError("corpus has no usable documents");
    return corpus;
}

inline DatasetSplit load_manifest(const PipelineConfig& cfg) {
    auto path = cfg.run_dir() / files::kSplit;
    if (!std::filesystem::exists(path)) throw ConfigError("split manifest missing; run `prepare` first: " + path.string());
    return read_split(path);
}

inline void cmd_prepare(const PipelineConfig& raw, std::ostream& out, std::ostream& err) {
    auto cfg = resolve_config(raw);
    RunLock lock(cfg.run_dir());
    auto corpus = load_configured_corpus(cfg, err);
    auto split = split_dataset(corpus, cfg.split_seed);
    write_text(cfg.run_dir() / files::kConfig, config_to_json(cfg).dump(2) + "\n");
    write_split(split, cfg.run_dir() / files::kSplit);
    auto stats = format_stats(corpus_stats(corpus));
    write_text(cfg.run_dir() / files::kStats, stats);
    out << stats;
    out << "split: train " << split.train.size() << ", validation " << split.validation.size() << ", test "
        << split.test.size() << '\n';
}

inline std::string train_log_jsonl(const std::vector<EpochLog>& log) {
    std::string text;
    for (const auto& e : log) {
        nlohmann::ordered_json j;
        j["epoch"] = e.epoch;
        j["train_loss"] = e.train_loss;
        j["val_f1"] = e.val_f1;
        text += j.dump() + "\n";
    }
    return text;
}

inline void cmd_train(const PipelineConfig& raw, std::ostream& out, std::ostream& err) {
    auto cfg = resolve_config(raw);
    const auto dir = cfg.run_dir();
    RunLock lock(dir);
    std::filesystem::remove(dir / files::kFailed);
    try {
        auto corpus = load_configured_corpus(cfg, err);
        auto split = load_manifest(cfg);
        write_text(dir / files::kConfig, config_to_json(cfg).dump(2) + "\n");
        auto p = train_pipeline(corpus, split, cfg.chunks, options_from(cfg), cfg.seed);
        for (const auto& id : p.embed_log.oov_chunks) err << "chunk " << id << " has no vocabulary words; zero vector\n";
        if (p.skipped_training_chunks)
            err << p.skipped_training_chunks << " embedder training chunks had no vocabulary words\n";

        save_pvdm(p.pvdm, (dir / files::kPvdm).string());
        save_aggregator(p.aggregator.model, (dir / files::kAggregator).string());
        std::filesystem::remove(dir / files::kSvm);
        if (p.svm) save_svm(*p.svm, (dir / files::kSvm).string());
        write_text(dir / files::kTrainLog, train_log_jsonl(p.aggregator.log));
        write_chunk_embeddings(p.embeddings, dir / files::kChunkEmbeddings);

        std::map<std::string, std::string> labels;
        for (const auto& d : corpus.documents) labels[d.id] = corpus.labels.name(d.label);
        export_embeddings(document_vectors(p.aggregator.model, p.embeddings), labels, dir / files::kDocVectors);
        export_embeddings(mean_chunk_vectors(p.embeddings), labels, dir / files::kMeanChunkVectors);

        out << "embedder: vocabulary " << p.pvdm.vocab.size() << ", " << p.pvdm.paragraph_ids.size()
            << " training chunks, final loss " << (p.pvdm.epoch_loss.empty() ? 0.0 : p.pvdm.epoch_loss.back()) << '\n';
        out << "aggregator: best epoch " << p.aggregator.best_epoch << " of " << p.aggregator.log.size()
            << ", validation macro-F1 " << percent(p.aggregator.best_val_f1) << '\n';
        if (p.svm) out << "svm: gamma " << p.svm->config.gamma << ", C " << p.svm->config.C << '\n';
    } catch (const std::exception& e) {
        write_text(dir / files::kFailed, std::string("train failed: ") + e.what() + "\n");
        throw;
    }
}

inline EmbeddingTable run_embeddings(const PipelineConfig& cfg, const Corpus& corpus, std::size_t n_chunks) {
    const auto dir = cfg.run_dir();
    if (std::filesystem::exists(dir / files::kChunkEmbeddings)) return read_chunk_embeddings(dir / files::kChunkEmbeddings);
    auto pvdm = load_pvdm((dir / files::kPvdm).string());
    return embed_corpus(pvdm, corpus, n_chunks, mix_seed(cfg.seed, kInferStream), nullptr, cfg.workers);
}

inline void require_checkpoint(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw ConfigError("checkpoint missing; run `train` first: " + path.string());
}

/// `split` is validation, test or all.
inline void cmd_evaluate(const PipelineConfig& raw, const std::string& split_name, std::ostream& out, std::ostream& err) {
    auto cfg = resolve_config(raw);
    const auto dir = cfg.run_dir();
    std::vector<std::string> splits;
    if (split_name == "all") splits = {"validation", "test"};
    else if (split_name == "validation" || split_name == "test") splits = {split_name};
    else throw ConfigError("split must be validation, test or all (got " + split_name + ")");

    require_checkpoint(dir / files::kAggregator);
    if (wants_svm(cfg.classifier)) require_checkpoint(dir / files::kSvm);
    RunLock lock(dir);
    auto corpus = load_configured_corpus(cfg, err);
    auto split = load_manifest(cfg);
    auto agg = load_aggregator((dir / files::kAggregator).string());
    if (!(agg.labels == corpus.labels)) throw DataError("checkpoint label set does not match the corpus");
    std::optional<SVMModel> svm;
    if (wants_svm(cfg.classifier)) svm = load_svm((dir / files::kSvm).string());
    auto table = run_embeddings(cfg, corpus, agg.n_chunks);

    for (const auto& name : splits) {
        const auto& ids = name == "test" ? split.test : split.validation;
        std::vector<EvalReport> reports;
        if (wants_linear(cfg.classifier)) reports.push_back(evaluate_linear(agg, corpus, ids, table, name));
        if (svm) reports.push_back(evaluate_svm(*svm, agg, corpus, ids, table, name));
        for (const auto& r : reports) {
            const std::string stem = "report_" + r.classifier + "_" + name;
            write_text(dir / (stem + ".json"), report_to_json(r).dump(2) + "\n");
            auto text = format_report(r);
            write_text(dir / (stem + ".txt"), text);
            out << text << '\n';
        }
    }
}

/// Prints one JSON line: predicted label plus probabilities (linear head) or
/// decision values (SVM head).
inline void cmd_predict(const PipelineConfig& raw, const std::filesystem::path& input, std::ostream& out,
                        std::ostream& err) {
    const auto dir = raw.run_dir();
    require_checkpoint(dir / files::kPvdm);
    require_checkpoint(dir / files::kAggregator);
    if (!std::filesystem::exists(input)) throw ConfigError("input document not found: " + input.string());
    auto tokens = tokenize(read_text(input));
    if (tokens.empty()) throw DataError("input document is empty after preprocessing");
    auto pvdm = load_pvdm((dir / files::kPvdm).string());
    auto agg = load_aggregator((dir / files::kAggregator).string());

    Document doc;
    doc.id = "input";
    doc.tokens = std::move(tokens);
    std::vector<const Document*> docs{&doc};
    EmbedLog log;
    auto table = embed_documents(pvdm, docs, agg.n_chunks, mix_seed(raw.seed, kInferStream), &log, raw.workers);
    if (!log.oov_chunks.empty()) err << log.oov_chunks.size() << " chunk(s) had no vocabulary words\n";
    auto seq = Sequence<float>::from_rows(table.at("input"), agg.n_chunks);

    nlohmann::ordered_json j;
    if (raw.classifier == ClassifierKind::svm) {
        require_checkpoint(dir / files::kSvm);
        auto svm = load_svm((dir / files::kSvm).string());
        auto d = document_vector(agg, seq);
        std::vector<double> x(d.begin(), d.end());
        auto values = svm.decision_values(x);
        j["label"] = agg.labels.name(argmax(values));
        j["classifier"] = "svm";
        nlohmann::ordered_json dv;
        for (std::size_t k = 0; k < values.size(); ++k) dv[agg.labels.name(k)] = values[k];
        j["decision_values"] = dv;
    } else {
        auto probs = predict_proba(agg, seq);
        j["label"] = agg.labels.name(argmax(probs));
        j["classifier"] = "linear";
        nlohmann::ordered_json pj;
        for (std::size_t k = 0; k < probs.size(); ++k) pj[agg.labels.name(k)] = probs[k];
        j["probabilities"] = pj;
    }
    out << j.dump() << '\n';
}

inline void cmd_sweep(const PipelineConfig& raw, std::ostream& out, std::ostream& err) {
    auto cfg = resolve_config(raw);
    const auto dir = cfg.run_dir();
    RunLock lock(dir);
    auto corpus = load_configured_corpus(cfg, err);
    auto split = load_manifest(cfg);
    auto rows = run_chunk_sweep(corpus, split, cfg.sweep.n_list, cfg.classifier, cfg.sweep.seeds, options_from(cfg), &err);
    write_text(dir / files::kSweep, sweep_to_tsv(rows));
    auto table = format_sweep(summarize_sweep(rows));
    write_text(dir / files::kSweepSummary, table);
    out << table;
    if (std::none_of(rows.begin(), rows.end(), [](const SweepRow& r) { return !r.failed; }))
        throw TrainingError("every sweep cell failed");
}

/// 0 success, 2 input/config error, 3 data error, 4 training failure.
inline int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e)) return 2;
    if (dynamic_cast<const DataError*>(&e)) return 3;
    if (dynamic_cast<const TrainingError*>(&e)) return 4;
    if (dynamic_cast<const std::filesystem::filesystem_error*>(&e)) return 2;
    return 4;
}

}  // namespace longdoc
