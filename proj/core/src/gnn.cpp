#include "realism/gnn.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "json_util.hpp"
#include "realism/error.hpp"
#include "realism/parallel.hpp"

namespace realism {

using detail::json;

std::size_t GnnParams::parameter_count() const {
  return layer1.self_weight.size() + layer1.neigh_weight.size() + layer1.bias.size() + layer2.self_weight.size() +
         layer2.neigh_weight.size() + layer2.bias.size();
}

void GnnParams::validate() const {
  const std::size_t h = hidden_dim();
  const std::size_t k = embed_dim();
  if (h == 0 || k == 0) throw ShapeError("gnn hidden and embed dims must be positive");
  if (layer1.self_weight.rows() != 1 || layer1.self_weight.cols() != h || layer1.neigh_weight.rows() != 1 ||
      layer1.neigh_weight.cols() != h) {
    throw ShapeError("gnn layer 1 weights must be 1 x hidden");
  }
  if (layer2.self_weight.rows() != h || layer2.self_weight.cols() != k || layer2.neigh_weight.rows() != h ||
      layer2.neigh_weight.cols() != k) {
    throw ShapeError("gnn layer 2 weights must be hidden x embed");
  }
}

GnnParams init_gnn(std::size_t hidden_dim, std::size_t embed_dim, Rng& rng) {
  if (hidden_dim == 0 || embed_dim == 0) throw ShapeError("gnn hidden and embed dims must be positive");
  const double s1 = std::sqrt(2.0 / (1.0 + static_cast<double>(hidden_dim)));
  const double s2 = std::sqrt(2.0 / static_cast<double>(hidden_dim + embed_dim));
  GnnParams p;
  p.layer1.self_weight = Matrix::gaussian(1, hidden_dim, s1, rng);
  p.layer1.neigh_weight = Matrix::gaussian(1, hidden_dim, s1, rng);
  p.layer1.bias = Vector(hidden_dim, 0.0);
  for (double& b : p.layer1.bias) b = rng.normal(0.0, 0.5);
  p.layer2.self_weight = Matrix::gaussian(hidden_dim, embed_dim, s2, rng);
  p.layer2.neigh_weight = Matrix::gaussian(hidden_dim, embed_dim, s2, rng);
  p.layer2.bias = Vector(embed_dim, 0.0);
  return p;
}

GnnParams zeros_like(const GnnParams& p) {
  GnnParams z;
  z.layer1 = {Matrix(1, p.hidden_dim()), Matrix(1, p.hidden_dim()), Vector(p.hidden_dim(), 0.0)};
  z.layer2 = {Matrix(p.hidden_dim(), p.embed_dim()), Matrix(p.hidden_dim(), p.embed_dim()),
              Vector(p.embed_dim(), 0.0)};
  return z;
}

namespace {

template <typename Fn>
void for_each_tensor(GnnParams& p, Fn&& fn) {
  fn(p.layer1.self_weight.values());
  fn(p.layer1.neigh_weight.values());
  fn(std::span<double>(p.layer1.bias));
  fn(p.layer2.self_weight.values());
  fn(p.layer2.neigh_weight.values());
  fn(std::span<double>(p.layer2.bias));
}

}  // namespace

Vector flatten(const GnnParams& p) {
  Vector flat;
  flat.reserve(p.parameter_count());
  for_each_tensor(const_cast<GnnParams&>(p), [&](std::span<double> t) { flat.insert(flat.end(), t.begin(), t.end()); });
  return flat;
}

void unflatten(GnnParams& p, std::span<const double> flat) {
  if (flat.size() != p.parameter_count()) throw ShapeError("unflatten: gnn parameter count mismatch");
  std::size_t at = 0;
  for_each_tensor(p, [&](std::span<double> t) {
    std::copy_n(flat.begin() + at, t.size(), t.begin());
    at += t.size();
  });
}

Matrix aggregation_matrix(const KnowledgeGraph& graph) {
  const std::size_t n = graph.size();
  Matrix a(n, n);
  Vector mass(n, 0.0);
  for (const auto& e : graph.adjacency()) mass[e.dst] += std::abs(e.weight);
  for (const auto& e : graph.adjacency()) a(e.dst, e.src) += e.weight / mass[e.dst];
  return a;
}

Matrix gnn_forward(const Matrix& aggregation, std::span<const double> trait_probs, const GnnParams& params,
                   GnnTrace* trace) {
  const std::size_t n = aggregation.rows();
  if (trait_probs.size() != n) {
    throw ShapeError("gnn input has " + std::to_string(trait_probs.size()) + " traits, graph has " + std::to_string(n));
  }
  const std::size_t h = params.hidden_dim();
  Matrix x(n, 1, Vector(trait_probs.begin(), trait_probs.end()));
  Matrix m1 = matmul(aggregation, x);
  Matrix pre1(n, h);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < h; ++c) {
      pre1(i, c) = x(i, 0) * params.layer1.self_weight(0, c) + m1(i, 0) * params.layer1.neigh_weight(0, c) +
                   params.layer1.bias[c];
    }
  }
  Matrix hidden = pre1;
  for (double& v : hidden.values()) v = v > 0.0 ? v : 0.0;
  Matrix m2 = matmul(aggregation, hidden);
  Matrix z = matmul(hidden, params.layer2.self_weight);
  const Matrix zn = matmul(m2, params.layer2.neigh_weight);
  for (std::size_t i = 0; i < n; ++i) {
    auto row = z.row(i);
    auto nrow = zn.row(i);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += nrow[c] + params.layer2.bias[c];
  }
  if (trace) {
    trace->inputs.assign(trait_probs.begin(), trait_probs.end());
    trace->message1 = Vector(m1.values().begin(), m1.values().end());
    trace->pre1 = std::move(pre1);
    trace->hidden = std::move(hidden);
    trace->message2 = std::move(m2);
  }
  return z;
}

void gnn_backward(const Matrix& aggregation, const GnnParams& params, const GnnTrace& trace, const Matrix& grad_nodes,
                  GnnParams& grads, double scale) {
  const std::size_t n = aggregation.rows();
  const std::size_t h = params.hidden_dim();
  const std::size_t k = params.embed_dim();
  if (grad_nodes.rows() != n || grad_nodes.cols() != k) throw ShapeError("gnn_backward: gradient shape mismatch");

  const Matrix d_w2s = matmul_tn(trace.hidden, grad_nodes);
  const Matrix d_w2n = matmul_tn(trace.message2, grad_nodes);
  for (std::size_t i = 0; i < d_w2s.size(); ++i) {
    grads.layer2.self_weight.values()[i] += scale * d_w2s.values()[i];
    grads.layer2.neigh_weight.values()[i] += scale * d_w2n.values()[i];
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < k; ++c) grads.layer2.bias[c] += scale * grad_nodes(i, c);

  // dH = dZ W2sᵀ + Aᵀ (dZ W2nᵀ)
  Matrix d_hidden = matmul_nt(grad_nodes, params.layer2.self_weight);
  const Matrix d_m2 = matmul_nt(grad_nodes, params.layer2.neigh_weight);
  const Matrix back = matmul_tn(aggregation, d_m2);
  for (std::size_t i = 0; i < d_hidden.size(); ++i) d_hidden.values()[i] += back.values()[i];

  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < h; ++c) {
      if (trace.pre1(i, c) <= 0.0) continue;
      const double d = scale * d_hidden(i, c);
      grads.layer1.self_weight(0, c) += trace.inputs[i] * d;
      grads.layer1.neigh_weight(0, c) += trace.message1[i] * d;
      grads.layer1.bias[c] += d;
    }
  }
}

RealismEmbedding forward(const KnowledgeGraph& graph, std::span<const double> trait_probs, const GnnParams& params,
                         std::string image_id) {
  return {std::move(image_id), gnn_forward(aggregation_matrix(graph), trait_probs, params)};
}

// ---------------------------------------------------------------------------
// Losses

namespace {

double norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Adds coef · dcos/da to ga and coef · dcos/db to gb.
void accumulate_cosine_grad(std::span<const double> a, std::span<const double> b, double coef, std::span<double> ga,
                            std::span<double> gb) {
  const double na = norm(a);
  const double nb = norm(b);
  if (na == 0.0 || nb == 0.0) return;
  const double c = dot(a, b) / (na * nb);
  for (std::size_t i = 0; i < a.size(); ++i) {
    ga[i] += coef * (b[i] / (na * nb) - c * a[i] / (na * na));
    gb[i] += coef * (a[i] / (na * nb) - c * b[i] / (nb * nb));
  }
}

}  // namespace

double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("cosine: length mismatch");
  const double saa = dot(a, a);
  const double sbb = dot(b, b);
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  // sqrt(s * s) == s exactly, so cos(x, x) and cos(x, -x) come out as exact +-1.
  return std::clamp(dot(a, b) / std::sqrt(saa * sbb), -1.0, 1.0);
}

double loss_sim(const KnowledgeGraph& graph, const Matrix& nodes, Matrix* grad) {
  if (nodes.rows() != graph.size()) throw ShapeError("loss_sim: embedding rows differ from graph size");
  const auto& relations = graph.relations();
  if (relations.empty()) throw ValidationError("loss_sim needs at least one declared relation");
  if (grad) *grad = Matrix(nodes.rows(), nodes.cols());
  const double inv = 1.0 / static_cast<double>(relations.size());
  double total = 0.0;
  for (std::size_t e = 0; e < relations.size(); ++e) {
    const auto& r = relations[e];
    const auto [i, j] = graph.relation_endpoints()[e];
    const double diff = cosine(nodes.row(i), nodes.row(j)) - r.weight;
    total += diff * diff;
    if (grad) accumulate_cosine_grad(nodes.row(i), nodes.row(j), 2.0 * diff * inv, grad->row(i), grad->row(j));
  }
  return total * inv;
}

double loss_rep(const Matrix& nodes, std::span<const NodePair> pairs, Matrix* grad) {
  if (grad) *grad = Matrix(nodes.rows(), nodes.cols());
  if (pairs.empty()) return 0.0;
  const double inv = 1.0 / static_cast<double>(pairs.size());
  double total = 0.0;
  for (const auto& [i, j] : pairs) {
    if (i >= nodes.rows() || j >= nodes.rows()) throw IndexError("loss_rep: pair index out of range");
    const double c = cosine(nodes.row(i), nodes.row(j));
    total += c * c;
    if (grad) accumulate_cosine_grad(nodes.row(i), nodes.row(j), 2.0 * c * inv, grad->row(i), grad->row(j));
  }
  return total * inv;
}

std::vector<NodePair> unconnected_pairs(const KnowledgeGraph& graph) {
  std::vector<NodePair> out;
  for (std::size_t i = 0; i < graph.size(); ++i)
    for (std::size_t j = i + 1; j < graph.size(); ++j)
      if (!graph.connected(i, j)) out.emplace_back(i, j);
  return out;
}

std::vector<NodePair> sample_unconnected_pairs(const KnowledgeGraph& graph, std::size_t count, Rng& rng) {
  const auto pool = unconnected_pairs(graph);
  std::vector<NodePair> out;
  if (pool.empty()) return out;
  out.reserve(count);
  for (std::size_t s = 0; s < count; ++s) out.push_back(pool[rng.index(pool.size())]);
  return out;
}

double edge_fit_error(const KnowledgeGraph& graph, const Matrix& nodes) {
  const auto& relations = graph.relations();
  if (relations.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t e = 0; e < relations.size(); ++e) {
    const auto [i, j] = graph.relation_endpoints()[e];
    total += std::abs(cosine(nodes.row(i), nodes.row(j)) - relations[e].weight);
  }
  return total / static_cast<double>(relations.size());
}

// ---------------------------------------------------------------------------
// Training

double gnn_objective(const KnowledgeGraph& graph, const Matrix& aggregation, std::span<const Vector> dataset,
                     const GnnParams& params, std::span<const NodePair> repulsion_pairs, double lambda_rep,
                     GnnParams* grads) {
  if (dataset.empty()) throw ValidationError("gnn objective needs a non-empty dataset");
  const double inv = 1.0 / static_cast<double>(dataset.size());
  double total = 0.0;
  GnnTrace trace;
  Matrix g_sim;
  Matrix g_rep;
  for (const auto& p : dataset) {
    const Matrix z = gnn_forward(aggregation, p, params, grads ? &trace : nullptr);
    const double l = loss_sim(graph, z, grads ? &g_sim : nullptr) +
                     lambda_rep * loss_rep(z, repulsion_pairs, grads ? &g_rep : nullptr);
    total += l;
    if (grads) {
      for (std::size_t i = 0; i < g_sim.size(); ++i) g_sim.values()[i] += lambda_rep * g_rep.values()[i];
      gnn_backward(aggregation, params, trace, g_sim, *grads, inv);
    }
  }
  return total * inv;
}

GnnTrainResult train_gnn(const KnowledgeGraph& graph, std::span<const Vector> dataset, const GnnConfig& config) {
  if (dataset.empty()) throw ValidationError("train_gnn needs at least one trait vector");
  for (const auto& p : dataset) {
    if (p.size() != graph.size()) throw ShapeError("train_gnn: trait vector length differs from graph size");
  }
  Rng init_rng(config.seed, 0);
  GnnTrainResult result;
  result.params = init_gnn(config.hidden_dim, config.embed_dim, init_rng);
  const Matrix aggregation = aggregation_matrix(graph);
  const std::size_t samples = config.repulsion_samples ? config.repulsion_samples : graph.relations().size();

  Vector flat = flatten(result.params);
  AdamState adam(flat.size(), config.adam);
  Rng pair_rng(config.seed, 1);
  result.loss_curve.reserve(config.epochs);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto pairs = sample_unconnected_pairs(graph, samples, pair_rng);
    GnnParams grads = zeros_like(result.params);
    const double loss = gnn_objective(graph, aggregation, dataset, result.params, pairs, config.lambda_rep, &grads);
    if (!std::isfinite(loss)) {
      throw NumericError("gnn loss became non-finite at epoch " + std::to_string(epoch) +
                         (epoch ? " (previous loss " + std::to_string(result.loss_curve.back()) + ")" : ""));
    }
    result.loss_curve.push_back(loss);
    adam_step(flat, flatten(grads), adam);
    unflatten(result.params, flat);
  }
  return result;
}

std::vector<RealismEmbedding> embed_dataset(const KnowledgeGraph& graph, const TraitHeads& heads,
                                            std::span<const FeatureRecord> features, const GnnParams& params,
                                            double threshold, std::size_t threads) {
  heads.check_against(graph);
  params.validate();
  const Matrix aggregation = aggregation_matrix(graph);
  std::vector<RealismEmbedding> out(features.size());
  parallel_for(features.size(), threads, [&](std::size_t i) {
    const TraitVector tv = predict_traits(features[i], heads, threshold);
    out[i] = {features[i].image_id, gnn_forward(aggregation, tv.probabilities, params)};
  });
  return out;
}

// ---------------------------------------------------------------------------
// Files

namespace {

json sage_to_json(const SageLayer& l) {
  json j;
  j["self_weight"] = detail::matrix_to_json(l.self_weight);
  j["neigh_weight"] = detail::matrix_to_json(l.neigh_weight);
  j["bias"] = detail::vector_to_json(l.bias);
  return j;
}

SageLayer sage_from_json(const json& j, const std::string& where) {
  if (!j.is_object() || !j.contains("self_weight") || !j.contains("neigh_weight") || !j.contains("bias")) {
    throw ValidationError(where + ": layer needs self_weight, neigh_weight and bias");
  }
  return {detail::matrix_from_json(j["self_weight"], where), detail::matrix_from_json(j["neigh_weight"], where),
          detail::vector_from_json(j["bias"], where)};
}

}  // namespace

std::string serialize_gnn(const GnnParams& params) {
  json j;
  j["hidden_dim"] = params.hidden_dim();
  j["embed_dim"] = params.embed_dim();
  j["layer1"] = sage_to_json(params.layer1);
  j["layer2"] = sage_to_json(params.layer2);
  return j.dump(2) + "\n";
}

GnnParams parse_gnn(const std::string& json_text) {
  const json j = detail::parse_json(json_text, "gnn params");
  if (!j.contains("layer1") || !j.contains("layer2")) throw ValidationError("gnn params need layer1 and layer2");
  GnnParams p{sage_from_json(j["layer1"], "layer1"), sage_from_json(j["layer2"], "layer2")};
  p.validate();
  if (j.contains("hidden_dim") && j["hidden_dim"].get<std::size_t>() != p.hidden_dim()) {
    throw ShapeError("gnn params: hidden_dim disagrees with layer shapes");
  }
  if (j.contains("embed_dim") && j["embed_dim"].get<std::size_t>() != p.embed_dim()) {
    throw ShapeError("gnn params: embed_dim disagrees with layer shapes");
  }
  return p;
}

std::string embedding_line(const RealismEmbedding& e) {
  json j;
  j["image_id"] = e.source_image_id;
  j["n"] = e.nodes.rows();
  j["k"] = e.nodes.cols();
  j["nodes"] = json::array();
  for (std::size_t i = 0; i < e.nodes.rows(); ++i) j["nodes"].push_back(detail::vector_to_json(e.nodes.row(i)));
  return j.dump();
}

RealismEmbedding parse_embedding_line(const std::string& line) {
  const json j = detail::parse_json(line, "embedding");
  if (!j.contains("image_id") || !j.contains("n") || !j.contains("k") || !j.contains("nodes")) {
    throw ValidationError("embedding record needs image_id, n, k and nodes");
  }
  const auto n = j["n"].get<std::size_t>();
  const auto k = j["k"].get<std::size_t>();
  if (!j["nodes"].is_array() || j["nodes"].size() != n) throw ShapeError("embedding: node count differs from n");
  Vector data;
  data.reserve(n * k);
  for (const auto& row : j["nodes"]) {
    Vector r = detail::vector_from_json(row, "embedding row");
    if (r.size() != k) throw ShapeError("embedding: row width differs from k");
    data.insert(data.end(), r.begin(), r.end());
  }
  return {j["image_id"].get<std::string>(), Matrix(n, k, std::move(data))};
}

std::vector<RealismEmbedding> read_embedding_file(const std::filesystem::path& path) {
  std::istringstream in(detail::read_text_file(path));
  std::vector<RealismEmbedding> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(parse_embedding_line(line));
  }
  return out;
}

}  // namespace realism
