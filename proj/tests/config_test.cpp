#include <gtest/gtest.h>

#include "longdoc/config.hpp"
#include "test_util.hpp"

using namespace longdoc;
using nlohmann::json;

TEST(Config, DefaultsWhenEmpty) {
    auto c = config_from_json(json::object());
    EXPECT_EQ(c.chunks, 3u);
    EXPECT_EQ(c.split_seed, 42u);
    EXPECT_EQ(c.classifier, ClassifierKind::linear);
    EXPECT_EQ(c.embedder.pvdm.dim, 100u);
    EXPECT_EQ(c.embedder.pvdm.window, 5u);
    EXPECT_EQ(c.embedder.pvdm.min_count, 5u);
    EXPECT_EQ(c.aggregator.hidden, 64u);
    EXPECT_DOUBLE_EQ(c.aggregator.adam.lr, 0.001);
    EXPECT_EQ(c.sweep.n_list, (std::vector<std::size_t>{1, 3, 5, 7, 10, 25, 50}));
    EXPECT_EQ(c.run_dir(), std::filesystem::path("runs") / "default");
    EXPECT_EQ(c.boilerplate_set(), (std::set<std::string>{"10-K", "10-Q"}));
}

TEST(Config, UnknownKeysAreRejected) {
    EXPECT_THROW(config_from_json(json{{"chunk", 3}}), ConfigError);
    EXPECT_THROW(config_from_json(json{{"embedder", {{"size", 10}}}}), ConfigError);
    EXPECT_THROW(config_from_json(json{{"aggregator", {{"dropout", 0.5}}}}), ConfigError);
    EXPECT_THROW(config_from_json(json{{"svm", {{"kernel", "rbf"}}}}), ConfigError);
    EXPECT_THROW(config_from_json(json{{"sweep", {{"n", {1}}}}}), ConfigError);
    EXPECT_THROW(config_from_json(json::array()), ConfigError);
}

TEST(Config, TypesAndRangesAreEnforced) {
    EXPECT_THROW(config_from_json(json{{"chunks", "three"}}), ConfigError);
    EXPECT_THROW(config_from_json(json{{"chunks", 0}}), ConfigError);
    EXPECT_THROW(config_from_json(json{{"classifier", "tree"}}), ConfigError);
    EXPECT_THROW(config_from_json(json{{"embedder", {{"alpha", 0.0}}}}), ConfigError);
    EXPECT_THROW(config_from_json(json{{"embedder", {{"alpha", 0.01}, {"min_alpha", 0.02}}}}), ConfigError);
    EXPECT_THROW(config_from_json(json{{"aggregator", {{"batch", 1}}}}), ConfigError);
    EXPECT_THROW(config_from_json(json{{"aggregator", {{"beta1", 1.0}}}}), ConfigError);
    EXPECT_THROW(config_from_json(json{{"aggregator", {{"bn_momentum", 0.0}}}}), ConfigError);
    EXPECT_THROW(config_from_json(json{{"svm", {{"C", 0.0}}}}), ConfigError);
    EXPECT_THROW(config_from_json(json{{"svm", {{"gamma_grid", {0.1, -1.0}}}}}), ConfigError);
    EXPECT_THROW(config_from_json(json{{"sweep", {{"n_list", json::array()}}}}), ConfigError);
    EXPECT_THROW(config_from_json(json{{"labels", {"a", "a"}}}), ConfigError);
    EXPECT_NO_THROW(config_from_json(json{{"aggregator", {{"lr", 0.0}}}}));
    EXPECT_NO_THROW(config_from_json(json{{"svm", {{"gamma", 0.0}}}}));
}

TEST(Config, JsonRoundTrip) {
    json j = {{"corpus_root", "/data/filings"},
              {"labels", {"10-K", "8-K"}},
              {"seed", 9},
              {"chunks", 7},
              {"classifier", "both"},
              {"run_name", "r7"},
              {"workers", 2},
              {"embedder", {{"dim", 50}, {"alpha", 0.05}, {"per_class", 10}}},
              {"aggregator", {{"hidden", 16}, {"batch", 1000}, {"bn_eps", 1e-5}}},
              {"svm", {{"gamma_grid", {0.1, 1.0}}, {"C_grid", {1.0, 10.0}}}},
              {"sweep", {{"n_list", {1, 3}}, {"seeds", {1, 2, 3}}}}};
    auto c = config_from_json(j);
    EXPECT_EQ(c.chunks, 7u);
    EXPECT_EQ(c.classifier, ClassifierKind::both);
    EXPECT_EQ(c.embedder.pvdm.dim, 50u);
    EXPECT_EQ(c.aggregator.batch, 1000u);
    EXPECT_EQ(c.svm.c_grid, (std::vector<double>{1.0, 10.0}));

    auto out = config_to_json(c);
    auto again = config_from_json(json::parse(out.dump()));
    EXPECT_EQ(config_to_json(again).dump(), out.dump());
}

TEST(Config, LoadFromFile) {
    testutil::TempDir dir("config_file");
    testutil::write_file(dir / "ok.json", R"({"chunks": 5, "embedder": {"epochs": 3}})");
    auto c = load_config(dir / "ok.json");
    EXPECT_EQ(c.chunks, 5u);
    EXPECT_EQ(c.embedder.pvdm.epochs, 3u);
    testutil::write_file(dir / "bad.json", "{chunks: 5");
    EXPECT_THROW(load_config(dir / "bad.json"), ConfigError);
    EXPECT_THROW(load_config(dir / "missing.json"), ConfigError);
}

TEST(Config, ClassifierNames) {
    EXPECT_EQ(parse_classifier("svm"), ClassifierKind::svm);
    EXPECT_EQ(to_string(ClassifierKind::both), "both");
    EXPECT_TRUE(wants_linear(ClassifierKind::both));
    EXPECT_TRUE(wants_svm(ClassifierKind::both));
    EXPECT_FALSE(wants_svm(ClassifierKind::linear));
}
