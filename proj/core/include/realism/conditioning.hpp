#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>

#include "realism/gnn.hpp"
#include "realism/numerics.hpp"

namespace realism {

inline constexpr std::size_t kDefaultAttentionDim = 768;
inline constexpr double kConditioningInitStddev = 0.02;

struct ConditioningParams {
  Matrix projection;  // k × d_attn
  Matrix positions;   // N × d_attn
  std::uint64_t seed = 0;

  std::size_t embed_dim() const { return projection.rows(); }
  std::size_t attention_dim() const { return projection.cols(); }
  std::size_t node_count() const { return positions.rows(); }
  void validate() const;

  bool operator==(const ConditioningParams&) const = default;
};

// Both matrices drawn from N(0, 0.02^2) on independent streams of `seed`.
ConditioningParams init_conditioning(std::size_t nodes, std::size_t embed_dim, std::size_t attention_dim,
                                     std::uint64_t seed);

struct ConditioningTokens {
  std::string image_id;
  Matrix tokens;  // N × d_attn

  bool operator==(const ConditioningTokens&) const = default;
};

// tokens_i = z_i · projection + positions_i
ConditioningTokens make_tokens(const RealismEmbedding& embedding, const ConditioningParams& params);

// Mean over nodes of (1 - cos(gen_i, tgt_i)); zero rows count as cos = 0.
double kg_alignment_loss(const RealismEmbedding& generated, const RealismEmbedding& target);

// l_diff + lambda_kg · l_kg. Throws ValidationError on negative lambda or
// non-finite input.
double combined_objective(double l_diff, double l_kg, double lambda_kg);

// Binary layout, all little-endian: "OGDTOK1\0", u32 N, u32 d_attn, then
// N·d_attn float32 values row-major.
inline constexpr char kTokenMagic[8] = {'O', 'G', 'D', 'T', 'O', 'K', '1', '\0'};
inline constexpr std::size_t kTokenHeaderBytes = 16;

std::string encode_tokens(const Matrix& tokens);
Matrix decode_tokens(const std::string& bytes);
void write_tokens(const std::filesystem::path& path, const Matrix& tokens);
Matrix read_tokens(const std::filesystem::path& path);

// Debug mirror: {"image_id", "n", "d_attn", "tokens": [[...]]}, values rounded
// through float32 so it matches the binary exactly.
std::string tokens_json(const ConditioningTokens& tokens);
ConditioningTokens parse_tokens_json(const std::string& text);

std::string serialize_conditioning(const ConditioningParams& params);
ConditioningParams parse_conditioning(const std::string& text);

}  // namespace realism
