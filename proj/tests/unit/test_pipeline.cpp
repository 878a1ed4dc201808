#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "realism/error.hpp"
#include "realism/pipeline.hpp"

using namespace realism;
namespace fs = std::filesystem;

TEST(Config, DefaultsAndKeys) {
  PipelineConfig c;
  EXPECT_EQ(c.d_attn, 768u);
  EXPECT_EQ(c.trait_threshold, 0.5);
  const auto keys = config_keys(c);
  ASSERT_FALSE(keys.empty());
  EXPECT_EQ(keys.front().first, "ontology_path");
  bool has_lambda = false;
  for (const auto& [k, v] : keys) has_lambda |= k == "gnn.lambda_rep";
  EXPECT_TRUE(has_lambda);
}

TEST(Config, SetValueAndErrors) {
  PipelineConfig c;
  set_config_value(c, "gnn.embed_dim", "8");
  EXPECT_EQ(c.gnn.embed_dim, 8u);
  set_config_value(c, "planner.strict_goal", "false");
  EXPECT_FALSE(c.strict_goal);
  EXPECT_THROW(set_config_value(c, "gnn.nope", "1"), ValidationError);
  EXPECT_THROW(set_config_value(c, "gnn.embed_dim", "eight"), ValidationError);
}

TEST(Config, ParseNestedAndRejectUnknown) {
  const auto c = parse_config(R"({"seed": 9, "gnn": {"epochs": 10}, "conditioning": {"d_attn": 16}})");
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.gnn.epochs, 10u);
  EXPECT_EQ(c.d_attn, 16u);
  EXPECT_THROW(parse_config(R"({"gnn": {"epoch": 10}})"), ValidationError);
  EXPECT_THROW(parse_config(R"({"trait_threshold": 1.5})").validate(), ValidationError);
}

TEST(Config, SeedEnvironmentOverride) {
  PipelineConfig c;
  c.seed = 3;
  ::setenv("OGD_SEED", "41", 1);
  EXPECT_TRUE(apply_seed_override(c));
  EXPECT_EQ(c.seed, 41u);
  ::setenv("OGD_SEED", "forty", 1);
  EXPECT_THROW(apply_seed_override(c), ValidationError);
  ::unsetenv("OGD_SEED");
  EXPECT_FALSE(apply_seed_override(c));
}

TEST(Config, HashIgnoresThreadsAndOutputDir) {
  PipelineConfig a, b;
  b.threads = 8;
  b.output_dir = "elsewhere";
  const std::string onto = resolve_ontology_text(a);
  EXPECT_EQ(config_hash(a, onto), config_hash(b, onto));
  b.seed = 1;
  EXPECT_NE(config_hash(a, onto), config_hash(b, onto));
  EXPECT_NE(config_hash(a, onto), config_hash(a, onto + " "));
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Manifest, PairsAndValidation) {
  const auto m = parse_manifest(R"({"entries": [
    {"image_id": "s1", "feature_path": "f.jsonl", "domain_label": "synthetic", "pair_id": "r1"},
    {"image_id": "r1", "feature_path": "f.jsonl", "domain_label": "real", "pair_id": "s1"},
    {"image_id": "s0", "feature_path": "f.jsonl", "domain_label": "synthetic", "pair_id": "r1"}]})",
                                "/data");
  EXPECT_EQ(m.entries[0].feature_path, fs::path("/data/f.jsonl"));
  const auto pairs = m.pairs();
  ASSERT_EQ(pairs.size(), 2u);
  EXPECT_EQ(pairs[0], (std::pair<std::string, std::string>{"s0", "r1"}));
  EXPECT_THROW(parse_manifest(R"({"entries": [{"image_id": "a", "feature_path": "f"}, {"image_id": "a", "feature_path": "f"}]})", "/"),
               ValidationError);
  EXPECT_THROW(parse_manifest(R"({"entries": [{"image_id": "a", "feature_path": "f", "pair_id": "ghost"}]})", "/"),
               ValidationError);
  EXPECT_THROW(parse_manifest(R"({"entries": [{"image_id": "../x", "feature_path": "f"}]})", "/"), ValidationError);
}

TEST(Manifest, SmokeFixtureLoads) {
  const auto m = load_manifest(fs::path(REALISM_SMOKE_DIR) / "manifest.json");
  EXPECT_EQ(m.entries.size(), 6u);
  EXPECT_EQ(m.pairs().size(), 3u);
  const auto features = load_manifest_features(m);
  ASSERT_EQ(features.size(), 6u);
  EXPECT_TRUE(std::is_sorted(features.begin(), features.end(),
                             [](const auto& a, const auto& b) { return a.image_id < b.image_id; }));
  const auto labels = load_manifest_labels(m, default_ontology());
  EXPECT_EQ(labels.size(), 6u);
}

TEST(Artifacts, ProvenanceListsEveryFile) {
  const fs::path root = fs::temp_directory_path() / "realism_artifacts_test";
  fs::remove_all(root);
  ArtifactWriter w(root, "cafe");
  w.write("a.txt", "abc");
  w.write("sub/b.txt", "");
  w.write_provenance();
  std::ifstream in(root / "provenance.json");
  const std::string text((std::istreambuf_iterator<char>(in)), {});
  EXPECT_NE(text.find("ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"), std::string::npos);
  EXPECT_NE(text.find("sub/b.txt"), std::string::npos);
  EXPECT_NE(text.find("cafe"), std::string::npos);
  fs::remove_all(root);
}
