// longdoc: prepare / train / evaluate / predict / sweep, plus `synth` for
// writing synthetic corpora to disk.

#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "longdoc/longdoc.hpp"

namespace {

std::vector<std::size_t> parse_n_list(const std::string& text) {
    std::vector<std::size_t> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        try {
            std::size_t pos = 0;
            auto v = std::stoul(item, &pos);
            if (pos != item.size() || v == 0) throw std::invalid_argument(item);
            out.push_back(v);
        } catch (const std::exception&) {
            throw longdoc::ConfigError("--n expects a comma-separated list of positive integers");
        }
    }
    if (out.empty()) throw longdoc::ConfigError("--n list is empty");
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Long-document classification by chunk embeddings, BiLSTM attention and linear/SVM heads"};
    app.require_subcommand(1);
    app.fallthrough();  // global options may follow the subcommand

    std::string config_path, output, classifier, n_list, split = "all", input;
    std::uint64_t seed = 0;
    std::size_t chunks = 0;
    app.add_option("--config", config_path, "Pipeline config (JSON)");
    app.add_option("--output", output, "Output directory (overrides config)");
    app.add_option("--seed", seed, "Training seed (overrides config)");
    app.add_option("--chunks", chunks, "Chunks per document (overrides config)")->check(CLI::PositiveNumber);
    app.add_option("--classifier", classifier, "linear, svm or both (overrides config)")
        ->check(CLI::IsMember({"linear", "svm", "both"}));

    auto* prepare = app.add_subcommand("prepare", "Load the corpus, write the split manifest and corpus statistics");
    auto* train = app.add_subcommand("train", "Train embedder, aggregator and optional SVM");
    auto* evaluate = app.add_subcommand("evaluate", "Write F1 reports and confusion matrices");
    evaluate->add_option("--split", split, "validation, test or all")->check(CLI::IsMember({"validation", "test", "all"}));
    auto* predict = app.add_subcommand("predict", "Classify one plain-text document");
    predict->add_option("input", input, "Document path")->required();
    auto* sweep = app.add_subcommand("sweep", "Train and score every chunk count in the sweep list");
    sweep->add_option("--n", n_list, "Comma-separated chunk counts (overrides config)");

    longdoc::SyntheticSpec synth_spec;
    std::string synth_root, synth_mode = "global";
    std::uint64_t synth_seed = 1;
    auto* synth = app.add_subcommand("synth", "Write a synthetic labelled corpus to disk");
    synth->add_option("root", synth_root, "Destination directory")->required();
    synth->add_option("--classes", synth_spec.classes);
    synth->add_option("--docs", synth_spec.docs_per_class, "Documents per class");
    synth->add_option("--length", synth_spec.doc_length, "Tokens per document");
    synth->add_option("--mode", synth_mode)->check(CLI::IsMember({"global", "localized"}));
    synth->add_option("--signal-rate", synth_spec.signal_rate);
    synth->add_option("--corpus-seed", synth_seed);

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) {
            synth_spec.mode = synth_mode == "global" ? longdoc::SignalMode::global : longdoc::SignalMode::localized;
            longdoc::write_corpus(longdoc::generate_synthetic_corpus(synth_spec, synth_seed), synth_root);
            return 0;
        }
        if (config_path.empty()) throw longdoc::ConfigError("--config is required");
        auto cfg = longdoc::load_config(config_path);
        if (!output.empty()) cfg.output = output;
        if (app.count("--seed")) cfg.seed = seed;
        if (chunks) cfg.chunks = chunks;
        if (!classifier.empty()) cfg.classifier = longdoc::parse_classifier(classifier);
        if (!n_list.empty()) cfg.sweep.n_list = parse_n_list(n_list);

        if (prepare->parsed()) longdoc::cmd_prepare(cfg, std::cout, std::cerr);
        else if (train->parsed()) longdoc::cmd_train(cfg, std::cout, std::cerr);
        else if (evaluate->parsed()) longdoc::cmd_evaluate(cfg, split, std::cout, std::cerr);
        else if (predict->parsed()) longdoc::cmd_predict(cfg, input, std::cout, std::cerr);
        else if (sweep->parsed()) longdoc::cmd_sweep(cfg, std::cout, std::cerr);
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return longdoc::exit_code_for(e);
    }
}
