#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "realism/gnn.hpp"
#include "realism/numerics.hpp"
#include "realism/trait_heads.hpp"

namespace realism {

// Real is the positive class; scores are softmax probabilities of "real".
inline constexpr std::size_t kRealClass = 1;
inline constexpr double kMetaThreshold = 0.9;

enum class MetaMethod { clip_features, end_to_end_cnn_placeholder, traits_only, traits_plus_gnn };

std::string to_string(MetaMethod m);
std::string display_name(MetaMethod m);

struct Confusion {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

  std::size_t total() const { return tp + fp + tn + fn; }
  bool operator==(const Confusion&) const = default;
};

struct EvalReport {
  MetaMethod method = MetaMethod::traits_plus_gnn;
  bool available = true;
  double accuracy = 0.0;  // percent
  double roc_auc = 0.5;
  double threshold = kMetaThreshold;
  Confusion confusion;
};

// Mann-Whitney AUC with midranks for ties. Needs both classes.
double roc_auc(std::span<const double> scores, const std::vector<bool>& positive);

// Accuracy and confusion at a fixed threshold (score >= threshold is real).
EvalReport evaluate_scores(std::span<const double> scores, const std::vector<bool>& positive,
                           double threshold = kMetaThreshold);

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;

  bool operator==(const Split&) const = default;
};

// Per-class seeded shuffle; round(test_fraction · class size) of each class,
// at least one, goes to the test side. Both index lists are sorted.
Split stratified_split(const std::vector<bool>& positive, double test_fraction, std::uint64_t seed);

struct MetaDataset {
  std::vector<std::string> image_ids;
  std::vector<Vector> inputs;
  std::vector<bool> positive;  // true = real

  std::size_t size() const { return inputs.size(); }
  void validate() const;
};

// Row-major flattening of the N × k node matrix.
Vector flatten_embedding(const RealismEmbedding& e);

struct MetaConfig {
  std::vector<std::size_t> hidden{64};  // empty = linear probe
  std::size_t epochs = 200;
  std::size_t batch_size = 16;
  AdamConfig adam;
  std::uint64_t seed = 0;
  double test_fraction = 0.3;
  double threshold = kMetaThreshold;
};

// Inputs are standardized with train-set statistics stored alongside the MLP.
struct MetaClassifier {
  Vector shift;
  Vector scale;
  MlpParams mlp;

  double score(std::span<const double> input) const;
};

// Cross-entropy + Adam on the given rows, class-balanced. Throws
// ValidationError when only one class is present.
MetaClassifier train_meta(const MetaDataset& data, std::span<const std::size_t> rows, const MetaConfig& config);

EvalReport evaluate(const MetaClassifier& classifier, const MetaDataset& data, std::span<const std::size_t> rows,
                    double threshold = kMetaThreshold);

// Splits, trains and evaluates one method.
EvalReport run_method(MetaMethod method, const MetaDataset& data, const MetaConfig& config);

struct BaselineInputs {
  std::span<const FeatureRecord> features;
  std::span<const std::pair<std::string, TraitVector>> trait_vectors;
  std::span<const RealismEmbedding> embeddings;
};

// Raw-feature linear probe, the unavailable CNN placeholder, traits-only and
// traits+GNN, all on the same split. Domain labels come from the feature
// records; every image id must appear in all three inputs.
std::vector<EvalReport> run_baselines(const BaselineInputs& inputs, const MetaConfig& config);

std::string reports_json(std::span<const EvalReport> reports);
std::string reports_table(std::span<const EvalReport> reports);

std::string serialize_meta(const MetaClassifier& c);
MetaClassifier parse_meta(const std::string& text);

}  // namespace realism
