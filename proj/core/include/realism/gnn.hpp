#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "realism/numerics.hpp"
#include "realism/ontology.hpp"
#include "realism/trait_heads.hpp"

namespace realism {

// One GraphSAGE layer: out_i = act(x_i · self_weight + m_i · neigh_weight + bias)
// where m_i is the signed weighted mean of neighbor features (self-loop
// included) normalized by the sum of absolute weights.
struct SageLayer {
  Matrix self_weight;   // in × out
  Matrix neigh_weight;  // in × out
  Vector bias;

  bool operator==(const SageLayer&) const = default;
};

struct GnnParams {
  SageLayer layer1;  // 1 → hidden, relu
  SageLayer layer2;  // hidden → embed, linear

  std::size_t hidden_dim() const { return layer1.bias.size(); }
  std::size_t embed_dim() const { return layer2.bias.size(); }
  std::size_t parameter_count() const;
  void validate() const;

  bool operator==(const GnnParams&) const = default;
};

GnnParams init_gnn(std::size_t hidden_dim, std::size_t embed_dim, Rng& rng);
GnnParams zeros_like(const GnnParams& p);
Vector flatten(const GnnParams& p);
void unflatten(GnnParams& p, std::span<const double> flat);

// Ordered node embeddings (row i = trait i) for one image.
struct RealismEmbedding {
  std::string source_image_id;
  Matrix nodes;  // N × k

  bool operator==(const RealismEmbedding&) const = default;
};

// A[i][j] = w_ij / sum_j |w_ij| over the expanded adjacency.
Matrix aggregation_matrix(const KnowledgeGraph& graph);

struct GnnTrace {
  Vector inputs;   // p
  Vector message1;  // A p
  Matrix pre1;     // layer-1 pre-activation
  Matrix hidden;   // relu(pre1)
  Matrix message2;  // A hidden
};

Matrix gnn_forward(const Matrix& aggregation, std::span<const double> trait_probs, const GnnParams& params,
                   GnnTrace* trace = nullptr);

// Accumulates scale · dL/dparams into `grads` given dL/dZ.
void gnn_backward(const Matrix& aggregation, const GnnParams& params, const GnnTrace& trace,
                  const Matrix& grad_nodes, GnnParams& grads, double scale = 1.0);

RealismEmbedding forward(const KnowledgeGraph& graph, std::span<const double> trait_probs, const GnnParams& params,
                         std::string image_id = {});

// Cosine similarity. A zero-norm argument gives 0 with zero gradient.
double cosine(std::span<const double> a, std::span<const double> b);

// Mean over declared relations of (cos(z_i, z_j) - w_ij)^2. Self-loops are
// excluded. When `grad` is non-null it receives dL/dZ.
double loss_sim(const KnowledgeGraph& graph, const Matrix& nodes, Matrix* grad = nullptr);

using NodePair = std::pair<std::size_t, std::size_t>;

// Mean of cos(z_i, z_j)^2 over the given pairs; 0 for an empty sample.
double loss_rep(const Matrix& nodes, std::span<const NodePair> pairs, Matrix* grad = nullptr);

// All unordered pairs (i < j) without a declared relation.
std::vector<NodePair> unconnected_pairs(const KnowledgeGraph& graph);
std::vector<NodePair> sample_unconnected_pairs(const KnowledgeGraph& graph, std::size_t count, Rng& rng);

// Mean |cos(z_i, z_j) - w_ij| over declared relations.
double edge_fit_error(const KnowledgeGraph& graph, const Matrix& nodes);

struct GnnConfig {
  std::size_t hidden_dim = 16;
  std::size_t embed_dim = 32;
  std::size_t epochs = 2000;
  double lambda_rep = 0.15;
  // Pairs drawn per epoch; 0 means one per declared relation.
  std::size_t repulsion_samples = 0;
  AdamConfig adam{.learning_rate = 1e-2};
  std::uint64_t seed = 0;
};

// L_sim + lambda · L_rep averaged over the dataset, with the analytic gradient
// written to `grads` when non-null.
double gnn_objective(const KnowledgeGraph& graph, const Matrix& aggregation, std::span<const Vector> dataset,
                     const GnnParams& params, std::span<const NodePair> repulsion_pairs, double lambda_rep,
                     GnnParams* grads);

struct GnnTrainResult {
  GnnParams params;
  std::vector<double> loss_curve;
};

// Adam on the combined objective; fresh repulsion pairs every epoch.
// Throws NumericError if the loss stops being finite.
GnnTrainResult train_gnn(const KnowledgeGraph& graph, std::span<const Vector> dataset, const GnnConfig& config);

// Trait prediction followed by propagation, one embedding per record, in
// input order.
std::vector<RealismEmbedding> embed_dataset(const KnowledgeGraph& graph, const TraitHeads& heads,
                                            std::span<const FeatureRecord> features, const GnnParams& params,
                                            double threshold = 0.5, std::size_t threads = 1);

std::string serialize_gnn(const GnnParams& params);
GnnParams parse_gnn(const std::string& json_text);

// {"image_id": ..., "n": N, "k": k, "nodes": [[...], ...]}
std::string embedding_line(const RealismEmbedding& e);
RealismEmbedding parse_embedding_line(const std::string& line);
std::vector<RealismEmbedding> read_embedding_file(const std::filesystem::path& path);

}  // namespace realism
