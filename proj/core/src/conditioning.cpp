#include "realism/conditioning.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "json_util.hpp"
#include "realism/error.hpp"
#include "realism/rng.hpp"

namespace realism {

using detail::json;

void ConditioningParams::validate() const {
  if (projection.rows() == 0 || projection.cols() == 0) throw ShapeError("conditioning projection is empty");
  if (positions.cols() != projection.cols()) {
    throw ShapeError("conditioning positions have width " + std::to_string(positions.cols()) + ", projection has " +
                     std::to_string(projection.cols()));
  }
  if (!projection.all_finite() || !positions.all_finite()) throw NumericError("conditioning parameters not finite");
}

ConditioningParams init_conditioning(std::size_t nodes, std::size_t embed_dim, std::size_t attention_dim,
                                     std::uint64_t seed) {
  if (nodes == 0 || embed_dim == 0 || attention_dim == 0) throw ShapeError("conditioning dimensions must be positive");
  Rng proj_rng(seed, 0);
  Rng pos_rng(seed, 1);
  return {Matrix::gaussian(embed_dim, attention_dim, kConditioningInitStddev, proj_rng),
          Matrix::gaussian(nodes, attention_dim, kConditioningInitStddev, pos_rng), seed};
}

ConditioningTokens make_tokens(const RealismEmbedding& embedding, const ConditioningParams& params) {
  const Matrix& z = embedding.nodes;
  if (z.cols() != params.embed_dim()) {
    throw ShapeError("embedding width " + std::to_string(z.cols()) + " does not match projection input " +
                     std::to_string(params.embed_dim()));
  }
  if (z.rows() != params.node_count()) {
    throw ShapeError("embedding has " + std::to_string(z.rows()) + " nodes, positional table has " +
                     std::to_string(params.node_count()));
  }
  Matrix t = matmul(z, params.projection);
  for (std::size_t i = 0; i < t.size(); ++i) t.values()[i] += params.positions.values()[i];
  return {embedding.source_image_id, std::move(t)};
}

double kg_alignment_loss(const RealismEmbedding& generated, const RealismEmbedding& target) {
  const Matrix& a = generated.nodes;
  const Matrix& b = target.nodes;
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError("alignment loss: embeddings are " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                     " and " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  }
  if (a.rows() == 0) throw ShapeError("alignment loss: empty embedding");
  double total = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) total += 1.0 - cosine(a.row(i), b.row(i));
  return total / static_cast<double>(a.rows());
}

double combined_objective(double l_diff, double l_kg, double lambda_kg) {
  if (!std::isfinite(l_diff) || !std::isfinite(l_kg) || !std::isfinite(lambda_kg)) {
    throw ValidationError("combined objective needs finite inputs");
  }
  if (lambda_kg < 0.0) throw ValidationError("lambda_kg must be non-negative");
  return l_diff + lambda_kg * l_kg;
}

// ---------------------------------------------------------------------------
// Token files

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out += static_cast<char>((v >> (8 * b)) & 0xffu);
}

std::uint32_t get_u32(const std::string& in, std::size_t at) {
  std::uint32_t v = 0;
  for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[at + b])) << (8 * b);
  return v;
}

std::uint32_t checked_u32(std::size_t v, const char* what) {
  if (v > std::numeric_limits<std::uint32_t>::max()) throw CapacityError(std::string(what) + " exceeds 32 bits");
  return static_cast<std::uint32_t>(v);
}

float to_f32(double v) {
  const float f = static_cast<float>(v);
  if (!std::isfinite(f)) throw NumericError("token value not representable as float32");
  return f;
}

}  // namespace

std::string encode_tokens(const Matrix& tokens) {
  std::string out(kTokenMagic, sizeof kTokenMagic);
  put_u32(out, checked_u32(tokens.rows(), "token count"));
  put_u32(out, checked_u32(tokens.cols(), "token width"));
  out.reserve(kTokenHeaderBytes + 4 * tokens.size());
  for (double v : tokens.values()) put_u32(out, std::bit_cast<std::uint32_t>(to_f32(v)));
  return out;
}

Matrix decode_tokens(const std::string& bytes) {
  if (bytes.size() < kTokenHeaderBytes || std::memcmp(bytes.data(), kTokenMagic, sizeof kTokenMagic) != 0) {
    throw ParseError("token file: bad magic (expected OGDTOK1)");
  }
  const std::size_t n = get_u32(bytes, 8);
  const std::size_t d = get_u32(bytes, 12);
  if (bytes.size() != kTokenHeaderBytes + 4 * n * d) {
    throw ParseError("token file: header says " + std::to_string(n) + "x" + std::to_string(d) + " but payload is " +
                     std::to_string(bytes.size() - kTokenHeaderBytes) + " bytes");
  }
  Matrix m(n, d);
  for (std::size_t i = 0; i < n * d; ++i)
    m.values()[i] = static_cast<double>(std::bit_cast<float>(get_u32(bytes, kTokenHeaderBytes + 4 * i)));
  return m;
}

void write_tokens(const std::filesystem::path& path, const Matrix& tokens) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  const std::string bytes = encode_tokens(tokens);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path.string());
}

Matrix read_tokens(const std::filesystem::path& path) { return decode_tokens(detail::read_text_file(path)); }

std::string tokens_json(const ConditioningTokens& t) {
  json j;
  j["image_id"] = t.image_id;
  j["n"] = t.tokens.rows();
  j["d_attn"] = t.tokens.cols();
  j["tokens"] = json::array();
  for (std::size_t i = 0; i < t.tokens.rows(); ++i) {
    json row = json::array();
    for (double v : t.tokens.row(i)) row.push_back(to_f32(v));
    j["tokens"].push_back(std::move(row));
  }
  return j.dump() + "\n";
}

ConditioningTokens parse_tokens_json(const std::string& text) {
  const json j = detail::parse_json(text, "tokens");
  if (!j.contains("image_id") || !j.contains("n") || !j.contains("d_attn") || !j.contains("tokens")) {
    throw ValidationError("token mirror needs image_id, n, d_attn and tokens");
  }
  const auto n = j["n"].get<std::size_t>();
  const auto d = j["d_attn"].get<std::size_t>();
  if (!j["tokens"].is_array() || j["tokens"].size() != n) throw ShapeError("token mirror: row count differs from n");
  Matrix m(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    const Vector row = detail::vector_from_json(j["tokens"][i], "token row");
    if (row.size() != d) throw ShapeError("token mirror: row width differs from d_attn");
    std::copy(row.begin(), row.end(), m.row(i).begin());
  }
  return {j["image_id"].get<std::string>(), std::move(m)};
}

std::string serialize_conditioning(const ConditioningParams& p) {
  json j;
  j["seed"] = p.seed;
  j["init_stddev"] = kConditioningInitStddev;
  j["embed_dim"] = p.embed_dim();
  j["attention_dim"] = p.attention_dim();
  j["nodes"] = p.node_count();
  j["projection"] = detail::matrix_to_json(p.projection);
  j["positions"] = detail::matrix_to_json(p.positions);
  return j.dump(2) + "\n";
}

ConditioningParams parse_conditioning(const std::string& text) {
  const json j = detail::parse_json(text, "conditioning");
  if (!j.contains("projection") || !j.contains("positions")) {
    throw ValidationError("conditioning params need projection and positions");
  }
  ConditioningParams p{detail::matrix_from_json(j["projection"], "projection"),
                       detail::matrix_from_json(j["positions"], "positions"), j.value("seed", std::uint64_t{0})};
  p.validate();
  return p;
}

}  // namespace realism
