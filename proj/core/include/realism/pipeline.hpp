#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "realism/conditioning.hpp"
#include "realism/gnn.hpp"
#include "realism/meta_eval.hpp"
#include "realism/trait_heads.hpp"

namespace realism {

inline constexpr const char* kVersion = "0.1.0";

struct PipelineConfig {
  std::filesystem::path ontology_path;  // empty = bundled ontology
  std::uint64_t seed = 0;
  double trait_threshold = 0.5;
  HeadConfig heads;
  GnnConfig gnn;
  MetaConfig meta;
  bool strict_goal = true;
  std::size_t d_attn = kDefaultAttentionDim;
  std::filesystem::path output_dir = "out";
  std::size_t threads = 1;  // never affects artifact bytes

  // Pushes `seed` into the per-stage configs.
  void propagate_seed();
  void validate() const;
};

// Dotted keys ("gnn.embed_dim") with their current values, in schema order.
// Flags are the keys with '.' and '_' turned into '-'.
std::vector<std::pair<std::string, std::string>> config_keys(const PipelineConfig& c);
void set_config_value(PipelineConfig& c, const std::string& key, const std::string& value);

PipelineConfig parse_config(const std::string& json_text);
PipelineConfig load_config(const std::filesystem::path& path);
// Canonical form; output_dir and threads are left out.
std::string canonical_config(const PipelineConfig& c);

// Applies OGD_SEED if set in the environment. Returns true when it did.
bool apply_seed_override(PipelineConfig& c);

std::string sha256_hex(const std::string& bytes);

// SHA-256 over the canonical config plus the ontology text it resolves to.
std::string config_hash(const PipelineConfig& c, const std::string& ontology_text);

std::string resolve_ontology_text(const PipelineConfig& c);

struct ManifestEntry {
  std::string image_id;
  std::filesystem::path feature_path;  // absolute after loading
  std::optional<std::filesystem::path> labels_ref;
  std::optional<DomainLabel> domain_label;
  std::optional<std::string> pair_id;  // image id of the counterpart
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;

  const ManifestEntry* find(const std::string& image_id) const;
  // Synthetic→real (source, target) pairs sorted by source id. An entry
  // without a domain label pairs as source when its counterpart is real.
  std::vector<std::pair<std::string, std::string>> pairs() const;
};

// {"entries": [...]}; relative paths resolve against `base_dir`. Rejects
// duplicate ids and dangling pair ids.
DatasetManifest parse_manifest(const std::string& json_text, const std::filesystem::path& base_dir);
DatasetManifest load_manifest(const std::filesystem::path& path);

// Feature records in image-id order, domain labels taken from the manifest
// when the record has none.
std::vector<FeatureRecord> load_manifest_features(const DatasetManifest& m);
std::vector<TraitLabels> load_manifest_labels(const DatasetManifest& m, const KnowledgeGraph& graph);

// Writes artifacts under one directory and keeps their hashes for the
// provenance sidecar. Paths are relative to the root.
class ArtifactWriter {
 public:
  ArtifactWriter(std::filesystem::path root, std::string config_sha256);

  void write(const std::string& relative, const std::string& bytes);
  // provenance.json: config hash plus sha256 of every artifact, sorted by path.
  void write_provenance();
  // run_log.json: command, seed, config hash, versions. No timestamps.
  void write_run_log(const std::string& command, std::uint64_t seed,
                     const std::map<std::string, std::string>& extra = {});

  const std::filesystem::path& root() const { return root_; }
  const std::string& config_sha256() const { return config_sha_; }

 private:
  std::filesystem::path root_;
  std::string config_sha_;
  std::map<std::string, std::string> hashes_;
};

struct PipelineSummary {
  std::size_t images = 0;
  std::size_t pairs = 0;
  std::size_t solved = 0;
  std::size_t already_satisfied = 0;
  std::size_t infeasible = 0;
};

// traits → embeddings → plan → prompt → tokens for every synthetic/real pair.
// Heads are trained from manifest labels and the GNN on the predicted trait
// vectors unless pre-trained files are given.
struct PipelineInputs {
  std::optional<std::filesystem::path> heads_path;
  std::optional<std::filesystem::path> gnn_path;
  std::optional<std::filesystem::path> conditioning_path;
};

PipelineSummary run_pipeline(const PipelineConfig& config, const DatasetManifest& manifest,
                             const PipelineInputs& inputs = {});

}  // namespace realism
