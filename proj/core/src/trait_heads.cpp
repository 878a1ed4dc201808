#include "realism/trait_heads.hpp"

#include <array>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "json_util.hpp"
#include "realism/error.hpp"
#include "realism/parallel.hpp"

namespace realism {

using detail::json;

std::string to_string(DomainLabel d) { return d == DomainLabel::real ? "real" : "synthetic"; }

std::optional<DomainLabel> domain_from_string(const std::string& s) {
  if (s == "real") return DomainLabel::real;
  if (s == "synthetic") return DomainLabel::synthetic;
  return std::nullopt;
}

TraitVector binarize(Vector probabilities, double threshold) {
  TraitVector v;
  v.threshold_used = threshold;
  v.binarized.reserve(probabilities.size());
  for (double p : probabilities) v.binarized.push_back(p >= threshold);
  v.probabilities = std::move(probabilities);
  return v;
}

void TraitHeads::check_against(const KnowledgeGraph& graph) const {
  if (heads.size() != graph.size()) {
    throw ValidationError("heads cover " + std::to_string(heads.size()) + " traits, ontology has " +
                          std::to_string(graph.size()));
  }
  for (std::size_t i = 0; i < heads.size(); ++i) {
    if (heads[i].trait_id != graph.trait(i).id) {
      throw ValidationError("head " + std::to_string(i) + " is for '" + heads[i].trait_id + "', ontology expects '" +
                            graph.trait(i).id + "'");
    }
  }
}

namespace {

std::uint64_t stream_for(const std::string& id) {
  // FNV-1a; stable across platforms unlike std::hash.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : id) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

TraitHead untrained_head(const std::string& id, std::size_t feature_dim, std::size_t hidden) {
  const std::array<std::size_t, 3> dims{feature_dim, hidden, 2};
  Rng rng(0);
  TraitHead head{id, false, zeros_like(make_mlp(dims, Activation::relu, rng))};
  return head;
}

struct Sample {
  const Vector* features;
  std::size_t target;
  double weight;
};

TraitHead train_one(const std::string& id, std::vector<Sample> samples, const HeadConfig& config) {
  const std::array<std::size_t, 3> dims{config.feature_dim, config.hidden, 2};
  Rng rng(config.seed, stream_for(id));
  TraitHead head{id, true, make_mlp(dims, Activation::relu, rng)};

  Vector params = flatten(head.mlp);
  AdamState adam(params.size(), config.adam);
  MlpParams grads = zeros_like(head.mlp);
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t batch = std::max<std::size_t>(1, config.batch_size);
  MlpTrace trace;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      grads = zeros_like(head.mlp);
      const double scale = 1.0 / static_cast<double>(end - start);
      for (std::size_t b = start; b < end; ++b) {
        const Sample& s = samples[order[b]];
        const Vector logits = mlp_forward(head.mlp, *s.features, &trace);
        const LossAndGrad ce = cross_entropy(logits, s.target);
        mlp_backward(head.mlp, trace, ce.grad, grads, scale * s.weight);
      }
      const Vector g = flatten(grads);
      adam_step(params, g, adam);
      unflatten(head.mlp, params);
    }
  }
  return head;
}

}  // namespace

TraitHeads train_heads(const KnowledgeGraph& graph, std::span<const FeatureRecord> features,
                       std::span<const TraitLabels> labels, const HeadConfig& config) {
  std::unordered_map<std::string, const FeatureRecord*> by_id;
  for (const auto& f : features) {
    if (f.features.size() != config.feature_dim) {
      throw ShapeError("image '" + f.image_id + "' has " + std::to_string(f.features.size()) +
                       " features, expected " + std::to_string(config.feature_dim));
    }
    by_id[f.image_id] = &f;
  }
  for (const auto& l : labels) {
    if (!by_id.count(l.image_id)) throw ValidationError("labels reference image '" + l.image_id + "' without features");
    for (const auto& [trait, value] : l.labels) {
      (void)value;
      if (!graph.find(trait)) throw ValidationError("labels reference unknown trait '" + trait + "'");
    }
  }

  // Collect per-trait samples up front so failures surface before training.
  std::vector<std::vector<Sample>> per_trait(graph.size());
  for (std::size_t t = 0; t < graph.size(); ++t) {
    const std::string& id = graph.trait(t).id;
    std::array<std::size_t, 2> counts{0, 0};
    for (const auto& l : labels) {
      auto it = l.labels.find(id);
      if (it == l.labels.end() || !it->second) continue;
      const std::size_t target = *it->second ? kPresentClass : 0;
      per_trait[t].push_back({&by_id.at(l.image_id)->features, target, 1.0});
      ++counts[target];
    }
    if (per_trait[t].empty()) continue;
    if (counts[0] == 0 || counts[1] == 0) {
      throw ValidationError("trait '" + id + "' needs at least one unmasked positive and negative label");
    }
    if (config.class_balance) {
      const double total = static_cast<double>(per_trait[t].size());
      for (auto& s : per_trait[t]) s.weight = total / (2.0 * static_cast<double>(counts[s.target]));
    }
  }

  TraitHeads out;
  out.feature_dim = config.feature_dim;
  out.heads.resize(graph.size());
  parallel_for(graph.size(), config.threads, [&](std::size_t t) {
    const std::string& id = graph.trait(t).id;
    out.heads[t] = per_trait[t].empty() ? untrained_head(id, config.feature_dim, config.hidden)
                                        : train_one(id, per_trait[t], config);
  });
  return out;
}

double head_probability(const TraitHead& head, std::span<const double> features) {
  const Vector logits = mlp_forward(head.mlp, features);
  return softmax(logits)[kPresentClass];
}

TraitVector predict_traits(const FeatureRecord& record, const TraitHeads& heads, double threshold) {
  if (record.features.size() != heads.feature_dim) {
    throw ShapeError("image '" + record.image_id + "' has " + std::to_string(record.features.size()) +
                     " features, heads expect " + std::to_string(heads.feature_dim));
  }
  Vector p;
  p.reserve(heads.heads.size());
  for (const auto& h : heads.heads) p.push_back(head_probability(h, record.features));
  return binarize(std::move(p), threshold);
}

// ---------------------------------------------------------------------------

FeatureRecord parse_feature_line(const std::string& line) {
  const json j = detail::parse_json(line, "feature record");
  if (!j.is_object() || !j.contains("image_id") || !j.contains("features")) {
    throw ValidationError("feature record needs image_id and features");
  }
  FeatureRecord r;
  r.image_id = j["image_id"].get<std::string>();
  r.features = detail::vector_from_json(j["features"], "features of '" + r.image_id + "'");
  if (j.contains("domain_label") && !j["domain_label"].is_null()) {
    const auto d = j["domain_label"].get<std::string>();
    r.domain_label = domain_from_string(d);
    if (!r.domain_label) throw ValidationError("unknown domain_label '" + d + "'");
  }
  return r;
}

std::string feature_line(const FeatureRecord& record) {
  json j;
  j["image_id"] = record.image_id;
  j["features"] = detail::vector_to_json(record.features);
  j["domain_label"] = record.domain_label ? json(to_string(*record.domain_label)) : json(nullptr);
  return j.dump();
}

std::vector<FeatureRecord> read_feature_file(const std::filesystem::path& path) {
  std::istringstream in(detail::read_text_file(path));
  std::vector<FeatureRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(parse_feature_line(line));
    } catch (const Error& e) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::vector<TraitLabels> parse_labels(const std::string& json_text, const KnowledgeGraph* graph) {
  const json j = detail::parse_json(json_text, "labels");
  if (!j.is_object()) throw ValidationError("labels file must be a JSON object keyed by image_id");
  std::vector<TraitLabels> out;
  for (const auto& [image_id, entry] : j.items()) {
    if (!entry.is_object()) throw ValidationError("labels for '" + image_id + "' must be an object");
    TraitLabels l{image_id, {}};
    for (const auto& [trait, value] : entry.items()) {
      if (graph && !graph->find(trait)) {
        throw ValidationError("labels for '" + image_id + "' reference unknown trait '" + trait + "'");
      }
      if (value.is_null()) {
        l.labels[trait] = std::nullopt;
      } else if (value.is_number_integer() && (value.get<int>() == 0 || value.get<int>() == 1)) {
        l.labels[trait] = value.get<int>() == 1;
      } else {
        throw ValidationError("label '" + trait + "' of '" + image_id + "' must be 0, 1 or null");
      }
    }
    out.push_back(std::move(l));
  }
  return out;
}

std::vector<TraitLabels> read_labels_file(const std::filesystem::path& path, const KnowledgeGraph* graph) {
  return parse_labels(detail::read_text_file(path), graph);
}

std::string serialize_heads(const TraitHeads& heads) {
  json j;
  j["feature_dim"] = heads.feature_dim;
  j["heads"] = json::array();
  for (const auto& h : heads.heads) {
    json hj;
    hj["trait"] = h.trait_id;
    hj["trained"] = h.trained;
    hj["mlp"] = detail::mlp_to_json(h.mlp);
    j["heads"].push_back(std::move(hj));
  }
  return j.dump(2) + "\n";
}

TraitHeads parse_heads(const std::string& json_text) {
  const json j = detail::parse_json(json_text, "heads");
  if (!j.contains("feature_dim") || !j.contains("heads")) throw ValidationError("heads file needs feature_dim and heads");
  TraitHeads out;
  out.feature_dim = j["feature_dim"].get<std::size_t>();
  for (const auto& hj : j["heads"]) {
    TraitHead h;
    h.trait_id = hj.at("trait").get<std::string>();
    h.trained = hj.at("trained").get<bool>();
    h.mlp = detail::mlp_from_json(hj.at("mlp"), "head '" + h.trait_id + "'");
    if (h.mlp.input_dim() != out.feature_dim || h.mlp.output_dim() != 2) {
      throw ShapeError("head '" + h.trait_id + "' has the wrong input or output width");
    }
    out.heads.push_back(std::move(h));
  }
  return out;
}

std::string trait_vector_line(const std::string& image_id, const TraitVector& v) {
  json j;
  j["image_id"] = image_id;
  j["probabilities"] = detail::vector_to_json(v.probabilities);
  j["binarized"] = json::array();
  for (bool b : v.binarized) j["binarized"].push_back(b ? 1 : 0);
  j["threshold"] = v.threshold_used;
  return j.dump();
}

std::pair<std::string, TraitVector> parse_trait_vector_line(const std::string& line) {
  const json j = detail::parse_json(line, "trait vector");
  if (!j.contains("image_id") || !j.contains("probabilities")) {
    throw ValidationError("trait vector record needs image_id and probabilities");
  }
  const double threshold = j.contains("threshold") ? j["threshold"].get<double>() : 0.5;
  return {j["image_id"].get<std::string>(),
          binarize(detail::vector_from_json(j["probabilities"], "probabilities"), threshold)};
}

}  // namespace realism
