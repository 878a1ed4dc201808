#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace realism {

enum class TraitCategory {
  lighting,
  shadows,
  material,
  edge_geometry,
  optical_sensor,
  color_reflectivity,
  scene_consistency,
};

std::string to_string(TraitCategory c);
std::optional<TraitCategory> category_from_string(std::string_view name);

struct Trait {
  std::string id;
  std::string display_name;
  TraitCategory category = TraitCategory::lighting;
  std::string enable_instruction;
  std::string disable_instruction;

  bool operator==(const Trait&) const = default;
};

enum class RelationKind { supports, opposes };

std::string to_string(RelationKind k);

// A declared trait-trait relation. Supports edges carry positive weight and,
// when `prerequisite` is set, make `src` a precondition for enabling `dst`.
struct Relation {
  std::string src;
  std::string dst;
  RelationKind kind = RelationKind::supports;
  double weight = 1.0;
  bool prerequisite = true;

  bool operator==(const Relation&) const = default;
};

// Directed edge of the expanded message-passing adjacency (node indices).
struct Edge {
  std::size_t src = 0;
  std::size_t dst = 0;
  double weight = 0.0;

  bool operator==(const Edge&) const = default;
};

// The static signed trait graph. Node order is the trait order given at
// construction and never changes. The adjacency holds every declared relation
// in both directions plus a +1 self-loop per node, sorted by (dst, src).
class KnowledgeGraph {
 public:
  KnowledgeGraph() = default;
  // Validates and expands; throws ValidationError listing every offender.
  // Weights are kept as given; use normalize_weights() to rescale.
  KnowledgeGraph(std::vector<Trait> traits, std::vector<Relation> relations);

  std::size_t size() const { return traits_.size(); }
  const std::vector<Trait>& traits() const { return traits_; }
  const std::vector<Relation>& relations() const { return relations_; }
  const std::vector<Edge>& adjacency() const { return adjacency_; }
  // Node indices (src, dst) of each declared relation, parallel to relations().
  const std::vector<std::pair<std::size_t, std::size_t>>& relation_endpoints() const { return endpoints_; }

  const Trait& trait(std::size_t i) const { return traits_.at(i); }
  std::optional<std::size_t> find(std::string_view id) const;
  // Throws ValidationError for unknown ids.
  std::size_t index_of(std::string_view id) const;

  // True when a declared relation joins the two nodes (either direction).
  bool connected(std::size_t a, std::size_t b) const;

  bool operator==(const KnowledgeGraph& other) const {
    return traits_ == other.traits_ && relations_ == other.relations_;
  }

 private:
  std::vector<Trait> traits_;
  std::vector<Relation> relations_;
  std::vector<Edge> adjacency_;
  std::vector<std::pair<std::size_t, std::size_t>> endpoints_;
  std::vector<std::vector<bool>> connected_;
};

// Rescales relation weights by 1 / max|w| (signs kept, self-loops stay +1).
KnowledgeGraph normalize_weights(const KnowledgeGraph& graph);

// Unordered pairs joined by an opposes relation; each pair is stored with the
// lexicographically smaller id first.
std::set<std::pair<std::string, std::string>> opposition_pairs(const KnowledgeGraph& graph);

// Parses, validates, normalizes and expands an ontology document.
KnowledgeGraph parse_ontology(std::string_view json_text);
KnowledgeGraph load_ontology(const std::filesystem::path& path);

// Canonical form: schema key order, 2-space indent, trailing newline.
std::string serialize_ontology(const KnowledgeGraph& graph);

// The bundled 14-trait ontology.
std::string_view default_ontology_json();
KnowledgeGraph default_ontology();

}  // namespace realism
