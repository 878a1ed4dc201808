#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "realism/conditioning.hpp"
#include "realism/error.hpp"

using namespace realism;

namespace {

RealismEmbedding random_embedding(Rng& rng, std::size_t n, std::size_t k) {
  return {"img", Matrix::gaussian(n, k, 1.0, rng)};
}

}  // namespace

TEST(Tokens, IdentityProjectionZeroPositions) {
  Rng rng(1);
  const auto e = random_embedding(rng, 5, 4);
  ConditioningParams p{Matrix::identity(4), Matrix(5, 4), 0};
  EXPECT_EQ(make_tokens(e, p).tokens, e.nodes);
}

TEST(Tokens, ZeroEmbeddingGivesPositions) {
  Rng rng(2);
  const auto p = init_conditioning(5, 4, 6, 9);
  const RealismEmbedding zero{"z", Matrix(5, 4)};
  EXPECT_EQ(make_tokens(zero, p).tokens, p.positions);
}

TEST(Tokens, PositionsAreRowIndexed) {
  Rng rng(3);
  const auto e = random_embedding(rng, 4, 3);
  const auto p = init_conditioning(4, 3, 5, 17);
  const std::vector<std::size_t> perm{2, 0, 3, 1};
  RealismEmbedding permuted = e;
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t c = 0; c < 3; ++c) permuted.nodes(i, c) = e.nodes(perm[i], c);
  const Matrix a = make_tokens(permuted, p).tokens;
  const Matrix b = make_tokens(e, p).tokens;
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t c = 0; c < 5; ++c) {
      const double delta = a(i, c) - b(perm[i], c);
      EXPECT_NEAR(delta, p.positions(i, c) - p.positions(perm[i], c), 1e-15);
    }
}

TEST(Tokens, InitIsSeededAndScaled) {
  const auto a = init_conditioning(14, 32, 768, 4);
  EXPECT_EQ(a, init_conditioning(14, 32, 768, 4));
  EXPECT_NE(a.projection, init_conditioning(14, 32, 768, 5).projection);
  double ss = 0;
  for (double v : a.projection.values()) ss += v * v;
  EXPECT_NEAR(std::sqrt(ss / a.projection.size()), kConditioningInitStddev, 0.002);
}

TEST(Tokens, ShapeMismatch) {
  const auto p = init_conditioning(4, 3, 5, 1);
  EXPECT_THROW(make_tokens({"x", Matrix(4, 2)}, p), ShapeError);
  EXPECT_THROW(make_tokens({"x", Matrix(3, 3)}, p), ShapeError);
}

TEST(AlignmentLoss, Examples) {
  Rng rng(4);
  const auto e = random_embedding(rng, 6, 5);
  EXPECT_EQ(kg_alignment_loss(e, e), 0.0);
  RealismEmbedding neg = e;
  for (double& v : neg.nodes.values()) v = -v;
  EXPECT_EQ(kg_alignment_loss(e, neg), 2.0);
  const RealismEmbedding a{"a", Matrix{{1, 0}, {0, 2}}};
  const RealismEmbedding b{"b", Matrix{{0, 3}, {-1, 0}}};
  EXPECT_EQ(kg_alignment_loss(a, b), 1.0);
}

TEST(AlignmentLoss, BoundsOnRandomPairs) {
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    const double l = kg_alignment_loss(random_embedding(rng, 14, 8), random_embedding(rng, 14, 8));
    EXPECT_GE(l, 0.0);
    EXPECT_LE(l, 2.0);
  }
}

TEST(CombinedObjective, Arithmetic) {
  EXPECT_EQ(combined_objective(0.5, 3.0, 0.0), 0.5);
  EXPECT_EQ(combined_objective(0.5, 0.0, 4.0), 0.5);
  EXPECT_NEAR(combined_objective(0.5, 1.0, 0.2), 0.7, 1e-15);
  EXPECT_THROW(combined_objective(0.5, 1.0, -0.1), ValidationError);
  EXPECT_THROW(combined_objective(NAN, 1.0, 0.1), ValidationError);
}

TEST(TokenFile, BinaryLayout) {
  const Matrix m{{1.0, -2.5}, {0.1, 3.0}, {0.0, 1e-3}};
  const std::string bytes = encode_tokens(m);
  ASSERT_EQ(bytes.size(), kTokenHeaderBytes + 6 * 4);
  EXPECT_EQ(bytes.substr(0, 8), std::string(kTokenMagic, 8));
  EXPECT_EQ(static_cast<unsigned char>(bytes[8]), 3);
  EXPECT_EQ(static_cast<unsigned char>(bytes[12]), 2);
  // 1.0f little-endian is 00 00 80 3f.
  EXPECT_EQ(static_cast<unsigned char>(bytes[16 + 3]), 0x3f);
  EXPECT_EQ(static_cast<unsigned char>(bytes[16 + 2]), 0x80);
  const Matrix back = decode_tokens(bytes);
  ASSERT_EQ(back.rows(), 3u);
  for (std::size_t i = 0; i < m.size(); ++i)
    EXPECT_EQ(back.values()[i], static_cast<double>(static_cast<float>(m.values()[i])));
  EXPECT_ANY_THROW(decode_tokens(bytes.substr(0, bytes.size() - 1)));
  EXPECT_ANY_THROW(decode_tokens("XXXXXXXX" + bytes.substr(8)));
}

TEST(TokenFile, JsonMirrorMatchesBinary) {
  const auto p = init_conditioning(3, 2, 4, 8);
  Rng rng(6);
  const auto tokens = make_tokens(random_embedding(rng, 3, 2), p);
  const auto path = std::filesystem::temp_directory_path() / "realism_tokens_test.bin";
  write_tokens(path, tokens.tokens);
  const Matrix bin = read_tokens(path);
  std::filesystem::remove(path);
  const auto mirror = parse_tokens_json(tokens_json(tokens));
  EXPECT_EQ(mirror.image_id, tokens.image_id);
  ASSERT_EQ(mirror.tokens.rows(), bin.rows());
  for (std::size_t i = 0; i < bin.size(); ++i) EXPECT_NEAR(mirror.tokens.values()[i], bin.values()[i], 1e-6);
}

TEST(TokenFile, ConditioningParamsRoundTrip) {
  const auto p = init_conditioning(3, 2, 4, 8);
  EXPECT_EQ(parse_conditioning(serialize_conditioning(p)), p);
}
