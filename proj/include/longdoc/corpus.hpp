#pragma once

// Corpus ingestion: loading `<root>/<label>/<doc>.txt`, text normalization,
// boilerplate stripping, stratified splits and descriptive statistics.

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "longdoc/errors.hpp"
#include "longdoc/random.hpp"

namespace longdoc {

using Tokens = std::vector<std::string>;

/// Ordered set of class names. A label's index is its position here and is
/// what every trained model stores.
class LabelSet {
public:
    LabelSet() = default;

    explicit LabelSet(std::vector<std::string> labels) : labels_(std::move(labels)) {
        if (labels_.size() < 2) throw ConfigError("label set needs at least 2 labels");
        for (std::size_t i = 0; i < labels_.size(); ++i) {
            if (!index_.emplace(labels_[i], i).second) throw ConfigError("duplicate label: " + labels_[i]);
        }
    }

    std::size_t size() const { return labels_.size(); }
    const std::string& name(std::size_t i) const { return labels_.at(i); }
    const std::vector<std::string>& names() const { return labels_; }

    bool contains(std::string_view label) const { return index_.count(std::string(label)) != 0; }

    std::size_t index(std::string_view label) const {
        auto it = index_.find(std::string(label));
        if (it == index_.end()) throw DataError("unknown label: " + std::string(label));
        return it->second;
    }

    friend bool operator==(const LabelSet& a, const LabelSet& b) { return a.labels_ == b.labels_; }

private:
    std::vector<std::string> labels_;
    std::unordered_map<std::string, std::size_t> index_;
};

/// The filing types the boilerplate rule applies to by default.
inline std::set<std::string> default_boilerplate_labels() { return {"10-K", "10-Q"}; }

/// Number of leading lines removed from boilerplate-labelled documents.
inline constexpr std::size_t kBoilerplateLines = 6;

inline std::string strip_boilerplate(std::string_view raw_text, std::string_view label,
                                     const std::set<std::string>& boilerplate_labels = default_boilerplate_labels()) {
    if (!boilerplate_labels.count(std::string(label))) return std::string(raw_text);
    std::size_t pos = 0;
    for (std::size_t line = 0; line < kBoilerplateLines; ++line) {
        auto nl = raw_text.find('\n', pos);
        if (nl == std::string_view::npos) return {};
        pos = nl + 1;
    }
    return std::string(raw_text.substr(pos));
}

inline bool is_token_char(unsigned char ch) { return ch < 0x80 && std::isalnum(ch); }

/// Lowercased maximal runs of ASCII alphanumerics; everything else separates.
inline Tokens tokenize(std::string_view text) {
    Tokens out;
    std::string cur;
    for (unsigned char ch : text) {
        if (is_token_char(ch)) {
            cur.push_back(static_cast<char>(std::tolower(ch)));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

/// Sentences are spans ending in '.', '!' or '?' followed by whitespace (or
/// end of text). Spans without any token are not counted.
inline std::size_t count_sentences(std::string_view text) {
    std::size_t count = 0;
    bool has_token = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        unsigned char ch = static_cast<unsigned char>(text[i]);
        if (is_token_char(ch)) has_token = true;
        if (ch == '.' || ch == '!' || ch == '?') {
            bool boundary = i + 1 == text.size() || std::isspace(static_cast<unsigned char>(text[i + 1]));
            if (boundary && has_token) {
                ++count;
                has_token = false;
            }
        }
    }
    if (has_token) ++count;
    return count;
}

struct Document {
    std::string id;
    std::size_t label = 0;
    std::string raw_text;
    Tokens tokens;
};

struct LoadReport {
    struct Rejection {
        std::string path;
        std::string reason;
    };
    std::vector<Rejection> rejected;
};

struct Corpus {
    LabelSet labels;
    std::set<std::string> boilerplate_labels = default_boilerplate_labels();
    std::vector<Document> documents;
    LoadReport report;

    const Document& by_id(const std::string& id) const {
        auto it = std::lower_bound(documents.begin(), documents.end(), id,
                                   [](const Document& d, const std::string& key) { return d.id < key; });
        if (it == documents.end() || it->id != id) throw DataError("unknown document id: " + id);
        return *it;
    }

    /// Builds a document from raw text, applying the corpus preprocessing.
    /// Returns false when the token stream is empty.
    bool make_document(std::string id, std::size_t label, std::string raw_text, Document& out) const {
        out.id = std::move(id);
        out.label = label;
        out.tokens = tokenize(strip_boilerplate(raw_text, labels.name(label), boilerplate_labels));
        out.raw_text = std::move(raw_text);
        return !out.tokens.empty();
    }

    /// Keeps documents sorted by id so lookups and iteration are deterministic.
    void sort() {
        std::sort(documents.begin(), documents.end(), [](const Document& a, const Document& b) { return a.id < b.id; });
    }
};

inline void print_load_report(const LoadReport& report, std::ostream& os = std::cerr) {
    for (const auto& r : report.rejected) os << "skipped " << r.path << ": " << r.reason << '\n';
}

/// Lists label subdirectories of a corpus root, sorted.
inline std::vector<std::string> discover_labels(const std::filesystem::path& root) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(root)) throw ConfigError("corpus directory not found: " + root.string());
    std::vector<std::string> out;
    for (const auto& entry : fs::directory_iterator(root))
        if (entry.is_directory()) out.push_back(entry.path().filename().string());
    std::sort(out.begin(), out.end());
    return out;
}

/// Loads one Document per `.txt` file. Document ids are `<label>/<stem>`.
inline Corpus load_corpus(const std::filesystem::path& root, const LabelSet& labels,
                          const std::set<std::string>& boilerplate_labels = default_boilerplate_labels()) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(root)) throw ConfigError("corpus directory not found: " + root.string());
    for (const auto& name : discover_labels(root))
        if (!labels.contains(name)) throw ConfigError("label directory not in label set: " + (root / name).string());

    Corpus corpus;
    corpus.labels = labels;
    corpus.boilerplate_labels = boilerplate_labels;
    for (std::size_t li = 0; li < labels.size(); ++li) {
        fs::path dir = root / labels.name(li);
        if (!fs::is_directory(dir)) throw ConfigError("missing label directory: " + dir.string());
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(dir))
            if (entry.is_regular_file() && entry.path().extension() == ".txt") files.push_back(entry.path());
        std::sort(files.begin(), files.end());
        for (const auto& file : files) {
            std::ifstream in(file, std::ios::binary);
            std::ostringstream buf;
            if (in) buf << in.rdbuf();
            if (!in) {
                corpus.report.rejected.push_back({file.string(), "unreadable"});
                continue;
            }
            Document doc;
            std::string id = labels.name(li) + "/" + file.stem().string();
            if (!corpus.make_document(std::move(id), li, buf.str(), doc)) {
                corpus.report.rejected.push_back({file.string(), "empty after preprocessing"});
                continue;
            }
            corpus.documents.push_back(std::move(doc));
        }
    }
    corpus.sort();
    return corpus;
}

struct DatasetSplit {
    std::uint64_t seed = 0;
    std::vector<std::string> train;
    std::vector<std::string> validation;
    std::vector<std::string> test;

    friend bool operator==(const DatasetSplit&, const DatasetSplit&) = default;
};

/// Stratified 70/15/15 split.
///
/// The global training count is round(0.7 N), apportioned across labels by
/// largest remainder so every label stays within one document of 70%. Each
/// label's remainder is halved between validation and test; odd remainders
/// alternate between the two so the global sizes differ by at most one.
/// Every label keeps at least one validation and one test document.
inline DatasetSplit split_dataset(const Corpus& corpus, std::uint64_t seed) {
    if (corpus.documents.empty()) throw DataError("cannot split an empty corpus");
    const std::size_t c = corpus.labels.size();
    std::vector<std::vector<std::string>> by_label(c);
    for (const auto& d : corpus.documents) by_label[d.label].push_back(d.id);

    std::vector<std::size_t> present;
    for (std::size_t l = 0; l < c; ++l) {
        if (by_label[l].empty()) continue;
        if (by_label[l].size() < 3)
            throw DataError("label " + corpus.labels.name(l) + " has fewer than 3 documents");
        present.push_back(l);
    }

    const std::size_t total = corpus.documents.size();
    const std::size_t train_target = (7 * total + 5) / 10;
    std::vector<std::size_t> n_train(c, 0);
    std::size_t assigned = 0;
    for (auto l : present) {
        n_train[l] = (7 * by_label[l].size()) / 10;
        assigned += n_train[l];
    }
    std::vector<std::size_t> order = present;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return (7 * by_label[a].size()) % 10 > (7 * by_label[b].size()) % 10;
    });
    for (std::size_t k = 0; assigned < train_target && k < order.size(); ++k, ++assigned) ++n_train[order[k]];
    for (auto l : present) n_train[l] = std::min(n_train[l], by_label[l].size() - 2);

    DatasetSplit split;
    split.seed = seed;
    bool odd_to_validation = true;
    for (auto l : present) {
        auto ids = by_label[l];
        Rng rng(mix_seed(seed, l));
        rng.shuffle(ids);
        std::size_t rest = ids.size() - n_train[l];
        std::size_t n_val = rest / 2;
        if (rest % 2 == 1) {
            if (odd_to_validation) ++n_val;
            odd_to_validation = !odd_to_validation;
        }
        auto it = ids.begin();
        split.train.insert(split.train.end(), it, it + static_cast<std::ptrdiff_t>(n_train[l]));
        it += static_cast<std::ptrdiff_t>(n_train[l]);
        split.validation.insert(split.validation.end(), it, it + static_cast<std::ptrdiff_t>(n_val));
        it += static_cast<std::ptrdiff_t>(n_val);
        split.test.insert(split.test.end(), it, ids.end());
    }
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.validation.begin(), split.validation.end());
    std::sort(split.test.begin(), split.test.end());
    return split;
}

inline std::string split_to_json(const DatasetSplit& split) {
    nlohmann::ordered_json j;
    j["seed"] = split.seed;
    j["train"] = split.train;
    j["validation"] = split.validation;
    j["test"] = split.test;
    return j.dump(2) + "\n";
}

inline DatasetSplit split_from_json(std::string_view text) {
    try {
        auto j = nlohmann::json::parse(text);
        DatasetSplit s;
        s.seed = j.at("seed").get<std::uint64_t>();
        s.train = j.at("train").get<std::vector<std::string>>();
        s.validation = j.at("validation").get<std::vector<std::string>>();
        s.test = j.at("test").get<std::vector<std::string>>();
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed split manifest: ") + e.what());
    }
}

inline void write_split(const DatasetSplit& split, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write split manifest: " + path.string());
    out << split_to_json(split);
}

inline DatasetSplit read_split(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("split manifest not found: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return split_from_json(buf.str());
}

struct LabelStats {
    std::string label;
    std::size_t count = 0;
    double mean_words = 0.0;
    double mean_sentences = 0.0;
};

/// Per-label document count, mean token count and mean sentence count.
/// Labels without documents are omitted.
inline std::vector<LabelStats> corpus_stats(const Corpus& corpus) {
    const std::size_t c = corpus.labels.size();
    std::vector<std::size_t> n(c, 0), words(c, 0), sentences(c, 0);
    for (const auto& d : corpus.documents) {
        ++n[d.label];
        words[d.label] += d.tokens.size();
        sentences[d.label] +=
            count_sentences(strip_boilerplate(d.raw_text, corpus.labels.name(d.label), corpus.boilerplate_labels));
    }
    std::vector<LabelStats> out;
    for (std::size_t l = 0; l < c; ++l) {
        if (n[l] == 0) continue;
        out.push_back({corpus.labels.name(l), n[l], static_cast<double>(words[l]) / n[l],
                       static_cast<double>(sentences[l]) / n[l]});
    }
    return out;
}

inline std::string format_stats(const std::vector<LabelStats>& stats) {
    std::ostringstream os;
    char line[160];
    std::snprintf(line, sizeof line, "%-16s %10s %10s %10s\n", "Type", "N", "W", "S");
    os << line;
    for (const auto& s : stats) {
        std::snprintf(line, sizeof line, "%-16s %10zu %10.1f %10.1f\n", s.label.c_str(), s.count, s.mean_words,
                      s.mean_sentences);
        os << line;
    }
    return os.str();
}

}  // namespace longdoc
