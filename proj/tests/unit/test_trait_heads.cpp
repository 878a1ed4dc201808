#include <gtest/gtest.h>

#include "realism/error.hpp"
#include "realism/trait_heads.hpp"

using namespace realism;

namespace {

KnowledgeGraph two_traits() {
  return KnowledgeGraph({{"a", "A", TraitCategory::lighting, "add a", "remove a"},
                         {"b", "B", TraitCategory::shadows, "add b", "remove b"}},
                        {});
}

// features = label of trait a (±1 shifted) plus small noise; trait b fully masked.
struct Toy {
  std::vector<FeatureRecord> features;
  std::vector<TraitLabels> labels;
};

Toy toy_set() {
  Toy t;
  Rng rng(2024);
  for (int i = 0; i < 20; ++i) {
    const bool on = i % 2 == 0;
    const std::string id = "img" + std::to_string(i);
    t.features.push_back({id, {(on ? 1.0 : 0.0) + 0.05 * rng.normal(), 0.05 * rng.normal(), 0.3}, std::nullopt});
    t.labels.push_back({id, {{"a", on}, {"b", std::nullopt}}});
  }
  return t;
}

HeadConfig toy_config() {
  HeadConfig c;
  c.feature_dim = 3;
  c.hidden = 8;
  c.epochs = 200;
  c.batch_size = 4;
  c.adam.learning_rate = 1e-2;
  c.seed = 3;
  return c;
}

TraitHead constant_head(double neg, double pos) {
  Rng rng(1);
  const std::vector<std::size_t> dims{3, 2};
  TraitHead h{"a", true, zeros_like(make_mlp(dims, Activation::relu, rng))};
  h.mlp.layers.back().bias = {neg, pos};
  return h;
}

}  // namespace

TEST(TraitHeads, SeparableToySetReachesFullAccuracy) {
  const auto toy = toy_set();
  const auto heads = train_heads(two_traits(), toy.features, toy.labels, toy_config());
  ASSERT_EQ(heads.heads.size(), 2u);
  EXPECT_TRUE(heads.heads[0].trained);
  for (std::size_t i = 0; i < toy.features.size(); ++i) {
    const auto v = predict_traits(toy.features[i], heads, 0.5);
    EXPECT_EQ(v.binarized[0], *toy.labels[i].labels.at("a")) << toy.features[i].image_id;
  }
}

TEST(TraitHeads, FullyMaskedTraitIsUntrainedAndHalf) {
  const auto toy = toy_set();
  const auto heads = train_heads(two_traits(), toy.features, toy.labels, toy_config());
  EXPECT_FALSE(heads.heads[1].trained);
  EXPECT_EQ(head_probability(heads.heads[1], std::vector<double>{5, -3, 1}), 0.5);
  const auto v = predict_traits(toy.features[0], heads, 0.5);
  EXPECT_EQ(v.probabilities[1], 0.5);
  EXPECT_TRUE(v.binarized[1]);
}

TEST(TraitHeads, DeterministicForSeed) {
  const auto toy = toy_set();
  auto cfg = toy_config();
  const auto a = train_heads(two_traits(), toy.features, toy.labels, cfg);
  const auto b = train_heads(two_traits(), toy.features, toy.labels, cfg);
  EXPECT_EQ(serialize_heads(a), serialize_heads(b));
  cfg.threads = 2;
  EXPECT_EQ(serialize_heads(train_heads(two_traits(), toy.features, toy.labels, cfg)), serialize_heads(a));
}

TEST(TraitHeads, ZeroLogitsGiveHalfAndTieRoundsUp) {
  const auto h = constant_head(0, 0);
  EXPECT_DOUBLE_EQ(head_probability(h, std::vector<double>{1, 2, 3}), 0.5);
  const auto v = binarize({0.5}, 0.5);
  EXPECT_TRUE(v.binarized[0]);
  EXPECT_FALSE(binarize({0.4999}, 0.5).binarized[0]);
}

TEST(TraitHeads, SaturatedHead) {
  const auto h = constant_head(-30, 30);
  const double p = head_probability(h, std::vector<double>{0, 0, 0});
  EXPECT_NEAR(p, 1.0, 1e-12);
  EXPECT_TRUE(binarize({p}, 0.5).binarized[0]);
}

TEST(TraitHeads, SerializeRoundTrip) {
  const auto toy = toy_set();
  const auto heads = train_heads(two_traits(), toy.features, toy.labels, toy_config());
  const auto text = serialize_heads(heads);
  EXPECT_EQ(serialize_heads(parse_heads(text)), text);
  parse_heads(text).check_against(two_traits());
  EXPECT_THROW(parse_heads(text).check_against(default_ontology()), ValidationError);
}

TEST(TraitHeads, FeatureLineRoundTripAndErrors) {
  const FeatureRecord r{"x_1", {0.25, -1.5, 3.0}, DomainLabel::synthetic};
  EXPECT_EQ(parse_feature_line(feature_line(r)), r);
  EXPECT_EQ(parse_feature_line("{\"image_id\": \"q\", \"features\": [1, 2]}").domain_label, std::nullopt);
  EXPECT_ANY_THROW(parse_feature_line("{\"image_id\": \"q\"}"));
  EXPECT_ANY_THROW(parse_feature_line("{\"image_id\": \"q\", \"features\": [1], \"domain_label\": \"fake\"}"));
}

TEST(TraitHeads, LabelsRejectUnknownTraits) {
  const auto g = two_traits();
  const auto ok = parse_labels("{\"i\": {\"a\": 1, \"b\": null}}", &g);
  ASSERT_EQ(ok.size(), 1u);
  EXPECT_EQ(ok[0].labels.at("a"), true);
  EXPECT_EQ(ok[0].labels.at("b"), std::nullopt);
  EXPECT_THROW(parse_labels("{\"i\": {\"zzz\": 1}}", &g), ValidationError);
}

TEST(TraitHeads, FeatureDimMismatchThrows) {
  const auto toy = toy_set();
  const auto heads = train_heads(two_traits(), toy.features, toy.labels, toy_config());
  EXPECT_THROW(predict_traits({"x", {1.0}, std::nullopt}, heads, 0.5), ShapeError);
}

TEST(TraitHeads, TraitVectorLineRoundTrip) {
  const auto v = binarize({0.1, 0.9}, 0.5);
  const auto [id, back] = parse_trait_vector_line(trait_vector_line("img", v));
  EXPECT_EQ(id, "img");
  EXPECT_EQ(back.probabilities, v.probabilities);
  EXPECT_EQ(back.binarized, v.binarized);
}
