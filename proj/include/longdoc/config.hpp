#pragma once

// PipelineConfig: the single declarative JSON file every command reads.
// Unknown keys are rejected; omitted keys keep their defaults.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "longdoc/aggregator.hpp"
#include "longdoc/corpus.hpp"
#include "longdoc/embedder.hpp"
#include "longdoc/errors.hpp"
#include "longdoc/svm.hpp"

namespace longdoc {

enum class ClassifierKind { linear, svm, both };

inline std::string to_string(ClassifierKind k) {
    switch (k) {
        case ClassifierKind::linear: return "linear";
        case ClassifierKind::svm: return "svm";
        case ClassifierKind::both: return "both";
    }
    return "linear";
}

inline ClassifierKind parse_classifier(const std::string& s) {
    if (s == "linear") return ClassifierKind::linear;
    if (s == "svm") return ClassifierKind::svm;
    if (s == "both") return ClassifierKind::both;
    throw ConfigError("classifier must be linear, svm or both (got " + s + ")");
}

inline bool wants_linear(ClassifierKind k) { return k != ClassifierKind::svm; }
inline bool wants_svm(ClassifierKind k) { return k != ClassifierKind::linear; }

struct EmbedderSettings {
    PVDMConfig pvdm;
    std::size_t per_class = 30;
};

struct SvmSettings {
    SVMConfig svm;
    // Optional validation grid; empty means use svm.gamma / svm.C directly.
    std::vector<double> gamma_grid;
    std::vector<double> c_grid;
};

struct SweepSettings {
    std::vector<std::size_t> n_list{1, 3, 5, 7, 10, 25, 50};
    std::vector<std::uint64_t> seeds{1};
};

struct PipelineConfig {
    std::string corpus_root;
    std::vector<std::string> labels;  // empty: discover from the corpus root
    std::vector<std::string> boilerplate_labels{"10-K", "10-Q"};
    std::uint64_t split_seed = 42;
    std::uint64_t seed = 1;
    std::size_t chunks = 3;
    ClassifierKind classifier = ClassifierKind::linear;
    std::string output = "runs";
    std::string run_name = "default";
    std::size_t workers = 1;
    EmbedderSettings embedder;
    AggregatorConfig aggregator;
    SvmSettings svm;
    SweepSettings sweep;

    std::filesystem::path run_dir() const { return std::filesystem::path(output) / run_name; }
    std::set<std::string> boilerplate_set() const { return {boilerplate_labels.begin(), boilerplate_labels.end()}; }
};

namespace config_detail {

using nlohmann::json;

/// Rejects keys outside `allowed` for the object at `where`.
inline void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key())) throw ConfigError("unknown config key: " + where + it.key());
}

template <class V>
void read(const json& j, const char* key, V& out, const std::string& where) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<V>();
    } catch (const json::exception&) {
        throw ConfigError("config key " + where + key + " has the wrong type");
    }
}

inline void require(bool ok, const std::string& what) {
    if (!ok) throw ConfigError("config value out of range: " + what);
}

}  // namespace config_detail

inline void validate(const PipelineConfig& c) {
    using config_detail::require;
    require(c.chunks >= 1, "chunks >= 1");
    require(c.workers >= 1, "workers >= 1");
    const auto& p = c.embedder.pvdm;
    require(p.dim >= 1, "embedder.dim >= 1");
    require(p.window >= 1, "embedder.window >= 1");
    require(p.negative >= 1, "embedder.negative >= 1");
    require(p.min_count >= 1, "embedder.min_count >= 1");
    require(p.alpha > 0, "embedder.alpha > 0");
    require(p.min_alpha >= 0 && p.min_alpha <= p.alpha, "0 <= embedder.min_alpha <= embedder.alpha");
    require(c.embedder.per_class >= 1, "embedder.per_class >= 1");
    const auto& a = c.aggregator;
    require(a.hidden >= 1, "aggregator.hidden >= 1");
    require(a.adam.lr >= 0, "aggregator.lr >= 0");
    require(a.adam.beta1 >= 0 && a.adam.beta1 < 1, "0 <= aggregator.beta1 < 1");
    require(a.adam.beta2 >= 0 && a.adam.beta2 < 1, "0 <= aggregator.beta2 < 1");
    require(a.adam.eps > 0, "aggregator.eps > 0");
    require(a.batch >= 2, "aggregator.batch >= 2");
    require(a.max_epochs >= 1, "aggregator.max_epochs >= 1");
    require(a.patience >= 1, "aggregator.patience >= 1");
    require(a.bn_momentum > 0 && a.bn_momentum <= 1, "0 < aggregator.bn_momentum <= 1");
    require(a.bn_eps > 0, "aggregator.bn_eps > 0");
    require(c.svm.svm.gamma >= 0, "svm.gamma >= 0 (0 selects 1/d)");
    require(c.svm.svm.C > 0, "svm.C > 0");
    require(c.svm.svm.tolerance > 0, "svm.tolerance > 0");
    require(c.svm.svm.max_passes >= 1, "svm.max_passes >= 1");
    for (double g : c.svm.gamma_grid) require(g > 0, "svm.gamma_grid entries > 0");
    for (double v : c.svm.c_grid) require(v > 0, "svm.C_grid entries > 0");
    require(!c.sweep.n_list.empty(), "sweep.n_list non-empty");
    for (auto n : c.sweep.n_list) require(n >= 1, "sweep.n_list entries >= 1");
    require(!c.sweep.seeds.empty(), "sweep.seeds non-empty");
    if (!c.labels.empty()) static_cast<void>(LabelSet(c.labels));
}

inline PipelineConfig config_from_json(const nlohmann::json& j) {
    using namespace config_detail;
    PipelineConfig c;
    check_keys(j,
               {"corpus_root", "labels", "boilerplate_labels", "split_seed", "seed", "chunks", "classifier", "output",
                "run_name", "workers", "embedder", "aggregator", "svm", "sweep"},
               "");
    read(j, "corpus_root", c.corpus_root, "");
    read(j, "labels", c.labels, "");
    read(j, "boilerplate_labels", c.boilerplate_labels, "");
    read(j, "split_seed", c.split_seed, "");
    read(j, "seed", c.seed, "");
    read(j, "chunks", c.chunks, "");
    std::string kind = to_string(c.classifier);
    read(j, "classifier", kind, "");
    c.classifier = parse_classifier(kind);
    read(j, "output", c.output, "");
    read(j, "run_name", c.run_name, "");
    read(j, "workers", c.workers, "");
    if (j.contains("embedder")) {
        const auto& e = j.at("embedder");
        const std::string w = "embedder.";
        check_keys(e, {"dim", "window", "negative", "min_count", "epochs", "alpha", "min_alpha", "infer_steps",
                       "per_class"},
                   w);
        auto& p = c.embedder.pvdm;
        read(e, "dim", p.dim, w);
        read(e, "window", p.window, w);
        read(e, "negative", p.negative, w);
        read(e, "min_count", p.min_count, w);
        read(e, "epochs", p.epochs, w);
        read(e, "alpha", p.alpha, w);
        read(e, "min_alpha", p.min_alpha, w);
        read(e, "infer_steps", p.infer_steps, w);
        read(e, "per_class", c.embedder.per_class, w);
    }
    if (j.contains("aggregator")) {
        const auto& a = j.at("aggregator");
        const std::string w = "aggregator.";
        check_keys(a, {"hidden", "lr", "beta1", "beta2", "eps", "batch", "max_epochs", "patience", "bn_momentum",
                       "bn_eps"},
                   w);
        auto& g = c.aggregator;
        read(a, "hidden", g.hidden, w);
        read(a, "lr", g.adam.lr, w);
        read(a, "beta1", g.adam.beta1, w);
        read(a, "beta2", g.adam.beta2, w);
        read(a, "eps", g.adam.eps, w);
        read(a, "batch", g.batch, w);
        read(a, "max_epochs", g.max_epochs, w);
        read(a, "patience", g.patience, w);
        read(a, "bn_momentum", g.bn_momentum, w);
        read(a, "bn_eps", g.bn_eps, w);
    }
    if (j.contains("svm")) {
        const auto& s = j.at("svm");
        const std::string w = "svm.";
        check_keys(s, {"gamma", "C", "tolerance", "max_passes", "gamma_grid", "C_grid"}, w);
        read(s, "gamma", c.svm.svm.gamma, w);
        read(s, "C", c.svm.svm.C, w);
        read(s, "tolerance", c.svm.svm.tolerance, w);
        read(s, "max_passes", c.svm.svm.max_passes, w);
        read(s, "gamma_grid", c.svm.gamma_grid, w);
        read(s, "C_grid", c.svm.c_grid, w);
    }
    if (j.contains("sweep")) {
        const auto& s = j.at("sweep");
        const std::string w = "sweep.";
        check_keys(s, {"n_list", "seeds"}, w);
        read(s, "n_list", c.sweep.n_list, w);
        read(s, "seeds", c.sweep.seeds, w);
    }
    validate(c);
    return c;
}

inline nlohmann::ordered_json config_to_json(const PipelineConfig& c) {
    nlohmann::ordered_json j;
    j["corpus_root"] = c.corpus_root;
    j["labels"] = c.labels;
    j["boilerplate_labels"] = c.boilerplate_labels;
    j["split_seed"] = c.split_seed;
    j["seed"] = c.seed;
    j["chunks"] = c.chunks;
    j["classifier"] = to_string(c.classifier);
    j["output"] = c.output;
    j["run_name"] = c.run_name;
    j["workers"] = c.workers;
    const auto& p = c.embedder.pvdm;
    j["embedder"] = {{"dim", p.dim},         {"window", p.window},        {"negative", p.negative},
                     {"min_count", p.min_count}, {"epochs", p.epochs},    {"alpha", p.alpha},
                     {"min_alpha", p.min_alpha}, {"infer_steps", p.infer_steps}, {"per_class", c.embedder.per_class}};
    const auto& a = c.aggregator;
    j["aggregator"] = {{"hidden", a.hidden},         {"lr", a.adam.lr},         {"beta1", a.adam.beta1},
                       {"beta2", a.adam.beta2},      {"eps", a.adam.eps},       {"batch", a.batch},
                       {"max_epochs", a.max_epochs}, {"patience", a.patience}, {"bn_momentum", a.bn_momentum},
                       {"bn_eps", a.bn_eps}};
    j["svm"] = {{"gamma", c.svm.svm.gamma},
                {"C", c.svm.svm.C},
                {"tolerance", c.svm.svm.tolerance},
                {"max_passes", c.svm.svm.max_passes},
                {"gamma_grid", c.svm.gamma_grid},
                {"C_grid", c.svm.c_grid}};
    j["sweep"] = {{"n_list", c.sweep.n_list}, {"seeds", c.sweep.seeds}};
    return j;
}

inline PipelineConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("config file not found: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(buf.str());
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path.string() + ": invalid JSON: " + e.what());
    }
    return config_from_json(j);
}

}  // namespace longdoc
