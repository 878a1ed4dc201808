#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "realism/numerics.hpp"
#include "realism/ontology.hpp"

namespace realism {

enum class DomainLabel { real, synthetic };

std::string to_string(DomainLabel d);
std::optional<DomainLabel> domain_from_string(const std::string& s);

// Frozen encoder activations for one image.
struct FeatureRecord {
  std::string image_id;
  Vector features;
  std::optional<DomainLabel> domain_label;

  bool operator==(const FeatureRecord&) const = default;
};

// Per-image trait annotations. A trait that is absent from the map, or mapped
// to nullopt, is masked and contributes nothing to training.
struct TraitLabels {
  std::string image_id;
  std::map<std::string, std::optional<bool>> labels;
};

// Probabilities and their thresholded states in graph node order.
struct TraitVector {
  Vector probabilities;
  std::vector<bool> binarized;
  double threshold_used = 0.5;
};

// Ties (p == threshold) count as present.
TraitVector binarize(Vector probabilities, double threshold);

// Logit index of the "present" class.
inline constexpr std::size_t kPresentClass = 1;

struct TraitHead {
  std::string trait_id;
  bool trained = false;
  MlpParams mlp;
};

struct TraitHeads {
  std::size_t feature_dim = 0;
  std::vector<TraitHead> heads;  // graph node order

  // Throws ValidationError unless the heads match the graph's traits in order.
  void check_against(const KnowledgeGraph& graph) const;
};

struct HeadConfig {
  std::size_t feature_dim = 512;
  std::size_t hidden = 128;
  std::size_t epochs = 200;
  std::size_t batch_size = 16;
  AdamConfig adam;
  std::uint64_t seed = 0;
  bool class_balance = true;
  std::size_t threads = 1;
};

// Trains one independent classifier per trait. Each head draws its random
// stream from (seed, trait id) only, so heads never influence each other.
// Traits without any unmasked label get an untrained head that outputs 0.5.
TraitHeads train_heads(const KnowledgeGraph& graph, std::span<const FeatureRecord> features,
                       std::span<const TraitLabels> labels, const HeadConfig& config);

// Positive-class softmax probability of one head.
double head_probability(const TraitHead& head, std::span<const double> features);

TraitVector predict_traits(const FeatureRecord& record, const TraitHeads& heads, double threshold);

// ---------------------------------------------------------------------------
// Files

// JSON-lines: {"image_id": ..., "features": [...], "domain_label": "real"|"synthetic"|null}
FeatureRecord parse_feature_line(const std::string& line);
std::string feature_line(const FeatureRecord& record);
std::vector<FeatureRecord> read_feature_file(const std::filesystem::path& path);

// JSON map image_id -> {trait-id: 0|1|null}. Unknown trait ids are rejected
// when a graph is given.
std::vector<TraitLabels> parse_labels(const std::string& json_text, const KnowledgeGraph* graph = nullptr);
std::vector<TraitLabels> read_labels_file(const std::filesystem::path& path,
                                          const KnowledgeGraph* graph = nullptr);

std::string serialize_heads(const TraitHeads& heads);
TraitHeads parse_heads(const std::string& json_text);

// JSON-lines record of a predicted trait vector.
std::string trait_vector_line(const std::string& image_id, const TraitVector& v);
std::pair<std::string, TraitVector> parse_trait_vector_line(const std::string& line);

}  // namespace realism
