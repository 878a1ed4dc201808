#include "realism/ontology.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "default_ontology_data.hpp"
#include "json.hpp"
#include "realism/error.hpp"

namespace realism {

using ordered_json = nlohmann::ordered_json;

namespace {

constexpr std::pair<TraitCategory, std::string_view> kCategoryNames[] = {
    {TraitCategory::lighting, "lighting"},
    {TraitCategory::shadows, "shadows"},
    {TraitCategory::material, "material"},
    {TraitCategory::edge_geometry, "edge_geometry"},
    {TraitCategory::optical_sensor, "optical_sensor"},
    {TraitCategory::color_reflectivity, "color_reflectivity"},
    {TraitCategory::scene_consistency, "scene_consistency"},
};

}  // namespace

std::string to_string(TraitCategory c) {
  for (const auto& [value, name] : kCategoryNames)
    if (value == c) return std::string(name);
  return "lighting";
}

std::optional<TraitCategory> category_from_string(std::string_view name) {
  for (const auto& [value, n] : kCategoryNames)
    if (n == name) return value;
  return std::nullopt;
}

std::string to_string(RelationKind k) {
  return k == RelationKind::supports ? "supports" : "opposes";
}

KnowledgeGraph::KnowledgeGraph(std::vector<Trait> traits, std::vector<Relation> relations)
    : traits_(std::move(traits)), relations_(std::move(relations)) {
  std::vector<std::string> problems;
  std::map<std::string, std::size_t, std::less<>> index;
  for (std::size_t i = 0; i < traits_.size(); ++i) {
    const auto& t = traits_[i];
    if (t.id.empty()) problems.push_back("trait #" + std::to_string(i) + " has an empty id");
    if (!index.emplace(t.id, i).second) problems.push_back("duplicate trait id '" + t.id + "'");
    if (t.enable_instruction.empty()) problems.push_back("trait '" + t.id + "' has an empty enable_instruction");
    if (t.disable_instruction.empty()) problems.push_back("trait '" + t.id + "' has an empty disable_instruction");
  }

  const std::size_t n = traits_.size();
  connected_.assign(n, std::vector<bool>(n, false));
  for (std::size_t r = 0; r < relations_.size(); ++r) {
    const auto& rel = relations_[r];
    const std::string label = "relation #" + std::to_string(r) + " (" + rel.src + " -> " + rel.dst + ")";
    const auto s = index.find(rel.src);
    const auto d = index.find(rel.dst);
    if (s == index.end()) problems.push_back(label + ": unknown src '" + rel.src + "'");
    if (d == index.end()) problems.push_back(label + ": unknown dst '" + rel.dst + "'");
    if (rel.src == rel.dst) problems.push_back(label + ": src equals dst");
    if (!std::isfinite(rel.weight) || rel.weight == 0.0) {
      problems.push_back(label + ": weight must be finite and non-zero");
    } else if ((rel.kind == RelationKind::supports) != (rel.weight > 0.0)) {
      problems.push_back(label + ": weight sign does not match kind '" + to_string(rel.kind) + "'");
    }
    if (rel.kind == RelationKind::opposes && rel.prerequisite) {
      problems.push_back(label + ": opposes relations cannot be prerequisites");
    }
    if (s != index.end() && d != index.end() && rel.src != rel.dst) {
      if (connected_[s->second][d->second]) {
        problems.push_back(label + ": pair already related");
      }
      connected_[s->second][d->second] = connected_[d->second][s->second] = true;
    }
  }

  if (!problems.empty()) {
    std::string message = "invalid ontology: ";
    for (std::size_t i = 0; i < problems.size(); ++i) message += (i ? "; " : "") + problems[i];
    throw ValidationError(message);
  }

  for (std::size_t i = 0; i < n; ++i) adjacency_.push_back({i, i, 1.0});
  for (const auto& rel : relations_) {
    const std::size_t s = index.at(rel.src);
    const std::size_t d = index.at(rel.dst);
    endpoints_.emplace_back(s, d);
    adjacency_.push_back({s, d, rel.weight});
    adjacency_.push_back({d, s, rel.weight});
  }
  std::sort(adjacency_.begin(), adjacency_.end(), [](const Edge& a, const Edge& b) {
    return a.dst != b.dst ? a.dst < b.dst : a.src < b.src;
  });
}

std::optional<std::size_t> KnowledgeGraph::find(std::string_view id) const {
  for (std::size_t i = 0; i < traits_.size(); ++i)
    if (traits_[i].id == id) return i;
  return std::nullopt;
}

std::size_t KnowledgeGraph::index_of(std::string_view id) const {
  if (auto i = find(id)) return *i;
  throw ValidationError("unknown trait id '" + std::string(id) + "'");
}

bool KnowledgeGraph::connected(std::size_t a, std::size_t b) const {
  return connected_.at(a).at(b);
}

KnowledgeGraph normalize_weights(const KnowledgeGraph& graph) {
  auto relations = graph.relations();
  if (relations.empty()) return graph;
  double peak = 0.0;
  for (const auto& r : relations) {
    if (!std::isfinite(r.weight)) throw ValidationError("normalize_weights: non-finite weight");
    peak = std::max(peak, std::abs(r.weight));
  }
  if (peak == 0.0) throw ValidationError("normalize_weights: all relation weights are zero");
  for (auto& r : relations) r.weight /= peak;
  return KnowledgeGraph(graph.traits(), std::move(relations));
}

std::set<std::pair<std::string, std::string>> opposition_pairs(const KnowledgeGraph& graph) {
  std::set<std::pair<std::string, std::string>> pairs;
  for (const auto& r : graph.relations()) {
    if (r.kind != RelationKind::opposes) continue;
    pairs.insert(std::minmax(r.src, r.dst));
  }
  return pairs;
}

// ---------------------------------------------------------------------------
// JSON document

namespace {

template <typename T>
T required(const ordered_json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) throw ValidationError(where + ": missing field '" + key + "'");
  try {
    return obj.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ValidationError(where + ": field '" + key + "' has the wrong type");
  }
}

}  // namespace

KnowledgeGraph parse_ontology(std::string_view json_text) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("ontology is not valid JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("traits") || !doc["traits"].is_array()) {
    throw ValidationError("ontology must be an object with a 'traits' array");
  }
  if (doc.contains("relations") && !doc["relations"].is_array()) {
    throw ValidationError("ontology 'relations' must be an array");
  }

  std::vector<Trait> traits;
  for (std::size_t i = 0; i < doc["traits"].size(); ++i) {
    const auto& t = doc["traits"][i];
    const std::string where = "traits[" + std::to_string(i) + "]";
    if (!t.is_object()) throw ValidationError(where + " is not an object");
    Trait trait;
    trait.id = required<std::string>(t, "id", where);
    trait.display_name = t.contains("display_name") ? required<std::string>(t, "display_name", where) : trait.id;
    const auto category = required<std::string>(t, "category", where);
    auto c = category_from_string(category);
    if (!c) throw ValidationError(where + ": unknown category '" + category + "'");
    trait.category = *c;
    trait.enable_instruction = required<std::string>(t, "enable_instruction", where);
    trait.disable_instruction = required<std::string>(t, "disable_instruction", where);
    traits.push_back(std::move(trait));
  }

  std::vector<Relation> relations;
  if (doc.contains("relations")) {
    for (std::size_t i = 0; i < doc["relations"].size(); ++i) {
      const auto& r = doc["relations"][i];
      const std::string where = "relations[" + std::to_string(i) + "]";
      if (!r.is_object()) throw ValidationError(where + " is not an object");
      Relation rel;
      rel.src = required<std::string>(r, "src", where);
      rel.dst = required<std::string>(r, "dst", where);
      const auto kind = required<std::string>(r, "kind", where);
      if (kind == "supports") {
        rel.kind = RelationKind::supports;
      } else if (kind == "opposes") {
        rel.kind = RelationKind::opposes;
      } else {
        throw ValidationError(where + ": unknown kind '" + kind + "'");
      }
      const bool supports = rel.kind == RelationKind::supports;
      rel.weight = r.contains("weight") ? required<double>(r, "weight", where) : (supports ? 1.0 : -1.0);
      rel.prerequisite = r.contains("prerequisite") ? required<bool>(r, "prerequisite", where) : supports;
      relations.push_back(std::move(rel));
    }
  }
  return normalize_weights(KnowledgeGraph(std::move(traits), std::move(relations)));
}

KnowledgeGraph load_ontology(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open ontology file " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_ontology(buffer.str());
}

std::string serialize_ontology(const KnowledgeGraph& graph) {
  ordered_json doc;
  doc["traits"] = ordered_json::array();
  for (const auto& t : graph.traits()) {
    ordered_json j;
    j["id"] = t.id;
    j["display_name"] = t.display_name;
    j["category"] = to_string(t.category);
    j["enable_instruction"] = t.enable_instruction;
    j["disable_instruction"] = t.disable_instruction;
    doc["traits"].push_back(std::move(j));
  }
  doc["relations"] = ordered_json::array();
  for (const auto& r : graph.relations()) {
    ordered_json j;
    j["src"] = r.src;
    j["dst"] = r.dst;
    j["kind"] = to_string(r.kind);
    j["weight"] = r.weight;
    j["prerequisite"] = r.prerequisite;
    doc["relations"].push_back(std::move(j));
  }
  return doc.dump(2) + "\n";
}

std::string_view default_ontology_json() { return kDefaultOntologyJson; }

KnowledgeGraph default_ontology() { return parse_ontology(default_ontology_json()); }

}  // namespace realism
