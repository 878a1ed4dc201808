#include "realism/pipeline.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <unordered_map>

#include "json_util.hpp"
#include "realism/error.hpp"
#include "realism/parallel.hpp"
#include "realism/planner.hpp"
#include "realism/prompt.hpp"

namespace realism {

using detail::json;

void PipelineConfig::propagate_seed() {
  heads.seed = seed;
  gnn.seed = seed;
  meta.seed = seed;
}

void PipelineConfig::validate() const {
  std::vector<std::string> problems;
  auto check = [&](bool ok, const std::string& msg) {
    if (!ok) problems.push_back(msg);
  };
  check(trait_threshold > 0.0 && trait_threshold < 1.0, "trait_threshold must lie in (0, 1)");
  check(!ontology_path.empty() ? std::filesystem::exists(ontology_path) : true,
        "ontology_path does not exist: " + ontology_path.string());
  check(heads.hidden > 0, "heads.hidden must be positive");
  check(heads.batch_size > 0, "heads.batch_size must be positive");
  check(heads.adam.learning_rate > 0.0, "heads.learning_rate must be positive");
  check(gnn.hidden_dim > 0 && gnn.embed_dim > 0, "gnn dimensions must be positive");
  check(gnn.lambda_rep >= 0.0, "gnn.lambda_rep must be non-negative");
  check(gnn.adam.learning_rate > 0.0, "gnn.learning_rate must be positive");
  check(meta.batch_size > 0, "meta.batch_size must be positive");
  check(meta.adam.learning_rate > 0.0, "meta.learning_rate must be positive");
  check(meta.test_fraction > 0.0 && meta.test_fraction < 1.0, "meta.test_fraction must lie in (0, 1)");
  check(meta.threshold > 0.0 && meta.threshold <= 1.0, "meta.threshold must lie in (0, 1]");
  check(d_attn > 0, "conditioning.d_attn must be positive");
  check(threads > 0, "threads must be positive");
  if (!problems.empty()) {
    std::string msg = "invalid config:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw ValidationError(msg);
  }
}

// ---------------------------------------------------------------------------
// Config keys

namespace {

struct Key {
  const char* name;
  std::function<std::string(const PipelineConfig&)> get;
  std::function<void(PipelineConfig&, const std::string&)> set;
  bool hashed = true;
};

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    if (!v.empty() && v[0] == '-') throw std::invalid_argument("negative");
    const unsigned long long x = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument("trailing");
    return x;
  } catch (const std::exception&) {
    throw ValidationError(key + ": expected a non-negative integer, got '" + v + "'");
  }
}

double to_real(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size() || !std::isfinite(x)) throw std::invalid_argument("bad");
    return x;
  } catch (const std::exception&) {
    throw ValidationError(key + ": expected a number, got '" + v + "'");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ValidationError(key + ": expected true or false, got '" + v + "'");
}

std::string real_text(double v) { return json(v).dump(); }

#define REALISM_SIZE_KEY(name, field)                                             \
  Key {                                                                            \
    name, [](const PipelineConfig& c) { return std::to_string(c.field); },         \
        [](PipelineConfig& c, const std::string& v) { c.field = to_u64(name, v); } \
  }
#define REALISM_REAL_KEY(name, field)                                              \
  Key {                                                                             \
    name, [](const PipelineConfig& c) { return real_text(c.field); },               \
        [](PipelineConfig& c, const std::string& v) { c.field = to_real(name, v); } \
  }
#define REALISM_BOOL_KEY(name, field)                                                   \
  Key {                                                                                  \
    name, [](const PipelineConfig& c) { return std::string(c.field ? "true" : "false"); }, \
        [](PipelineConfig& c, const std::string& v) { c.field = to_bool(name, v); }      \
  }

const std::vector<Key>& keys() {
  static const std::vector<Key> table = {
      Key{"ontology_path", [](const PipelineConfig& c) { return c.ontology_path.string(); },
          [](PipelineConfig& c, const std::string& v) { c.ontology_path = v; }, false},
      Key{"output_dir", [](const PipelineConfig& c) { return c.output_dir.string(); },
          [](PipelineConfig& c, const std::string& v) { c.output_dir = v; }, false},
      REALISM_SIZE_KEY("seed", seed),
      REALISM_REAL_KEY("trait_threshold", trait_threshold),
      REALISM_SIZE_KEY("heads.hidden", heads.hidden),
      REALISM_SIZE_KEY("heads.epochs", heads.epochs),
      REALISM_SIZE_KEY("heads.batch_size", heads.batch_size),
      REALISM_REAL_KEY("heads.learning_rate", heads.adam.learning_rate),
      REALISM_BOOL_KEY("heads.class_balance", heads.class_balance),
      REALISM_SIZE_KEY("gnn.hidden_dim", gnn.hidden_dim),
      REALISM_SIZE_KEY("gnn.embed_dim", gnn.embed_dim),
      REALISM_SIZE_KEY("gnn.epochs", gnn.epochs),
      REALISM_REAL_KEY("gnn.lambda_rep", gnn.lambda_rep),
      REALISM_SIZE_KEY("gnn.repulsion_samples", gnn.repulsion_samples),
      REALISM_REAL_KEY("gnn.learning_rate", gnn.adam.learning_rate),
      Key{"meta.hidden",
          [](const PipelineConfig& c) { return std::to_string(c.meta.hidden.empty() ? 0 : c.meta.hidden.front()); },
          [](PipelineConfig& c, const std::string& v) {
            const auto h = to_u64("meta.hidden", v);
            c.meta.hidden = h ? std::vector<std::size_t>{h} : std::vector<std::size_t>{};
          }},
      REALISM_SIZE_KEY("meta.epochs", meta.epochs),
      REALISM_SIZE_KEY("meta.batch_size", meta.batch_size),
      REALISM_REAL_KEY("meta.learning_rate", meta.adam.learning_rate),
      REALISM_REAL_KEY("meta.test_fraction", meta.test_fraction),
      REALISM_REAL_KEY("meta.threshold", meta.threshold),
      REALISM_BOOL_KEY("planner.strict_goal", strict_goal),
      REALISM_SIZE_KEY("conditioning.d_attn", d_attn),
  };
  return table;
}

#undef REALISM_SIZE_KEY
#undef REALISM_REAL_KEY
#undef REALISM_BOOL_KEY

const Key& find_key(const std::string& name) {
  for (const auto& k : keys())
    if (name == k.name) return k;
  throw ValidationError("unknown config key '" + name + "'");
}

void flatten_json(const json& j, const std::string& prefix, PipelineConfig& c) {
  for (const auto& [k, v] : j.items()) {
    const std::string key = prefix.empty() ? k : prefix + "." + k;
    if (v.is_object()) {
      flatten_json(v, key, c);
    } else if (v.is_string()) {
      find_key(key).set(c, v.get<std::string>());
    } else if (v.is_number() || v.is_boolean()) {
      find_key(key).set(c, v.dump());
    } else {
      throw ValidationError("config key '" + key + "' has an unsupported value");
    }
  }
}

}  // namespace

std::vector<std::pair<std::string, std::string>> config_keys(const PipelineConfig& c) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& k : keys()) out.emplace_back(k.name, k.get(c));
  return out;
}

void set_config_value(PipelineConfig& c, const std::string& key, const std::string& value) {
  find_key(key).set(c, value);
}

PipelineConfig parse_config(const std::string& json_text) {
  const json j = detail::parse_json(json_text, "config");
  if (!j.is_object()) throw ValidationError("config must be a JSON object");
  PipelineConfig c;
  flatten_json(j, "", c);
  return c;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  PipelineConfig c = parse_config(detail::read_text_file(path));
  if (!c.ontology_path.empty() && c.ontology_path.is_relative()) c.ontology_path = path.parent_path() / c.ontology_path;
  return c;
}

std::string canonical_config(const PipelineConfig& c) {
  json j = json::object();
  for (const auto& k : keys()) {
    if (!k.hashed) continue;
    const std::string name = k.name;
    const auto dot = name.find('.');
    const std::string value = k.get(c);
    json v = json::parse(value);
    if (dot == std::string::npos) {
      j[name] = v;
    } else {
      j[name.substr(0, dot)][name.substr(dot + 1)] = v;
    }
  }
  return j.dump(2) + "\n";
}

bool apply_seed_override(PipelineConfig& c) {
  const char* env = std::getenv("OGD_SEED");
  if (!env || !*env) return false;
  c.seed = to_u64("OGD_SEED", env);
  return true;
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw IoError("sha256 computation failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

std::string resolve_ontology_text(const PipelineConfig& c) {
  if (c.ontology_path.empty()) return std::string(default_ontology_json());
  return detail::read_text_file(c.ontology_path);
}

std::string config_hash(const PipelineConfig& c, const std::string& ontology_text) {
  return sha256_hex(canonical_config(c) + "\n" + sha256_hex(ontology_text));
}

// ---------------------------------------------------------------------------
// Manifest

const ManifestEntry* DatasetManifest::find(const std::string& image_id) const {
  for (const auto& e : entries)
    if (e.image_id == image_id) return &e;
  return nullptr;
}

std::vector<std::pair<std::string, std::string>> DatasetManifest::pairs() const {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& e : entries) {
    if (!e.pair_id) continue;
    const ManifestEntry* other = find(*e.pair_id);
    const bool source = e.domain_label ? *e.domain_label == DomainLabel::synthetic
                                       : (other->domain_label && *other->domain_label == DomainLabel::real);
    if (source) out.emplace_back(e.image_id, *e.pair_id);
  }
  std::sort(out.begin(), out.end());
  return out;
}

namespace {

bool safe_id(const std::string& id) {
  if (id.empty() || id == "." || id == "..") return false;
  return std::all_of(id.begin(), id.end(),
                     [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.'; });
}

}  // namespace

DatasetManifest parse_manifest(const std::string& json_text, const std::filesystem::path& base_dir) {
  const json j = detail::parse_json(json_text, "manifest");
  if (!j.is_object() || !j.contains("entries") || !j["entries"].is_array()) {
    throw ValidationError("manifest must be an object with an \"entries\" array");
  }
  DatasetManifest m;
  std::vector<std::string> problems;
  for (std::size_t i = 0; i < j["entries"].size(); ++i) {
    const json& e = j["entries"][i];
    const std::string where = "entries[" + std::to_string(i) + "]";
    if (!e.is_object() || !e.contains("image_id") || !e.contains("feature_path")) {
      problems.push_back(where + ": needs image_id and feature_path");
      continue;
    }
    ManifestEntry entry;
    entry.image_id = e["image_id"].get<std::string>();
    if (!safe_id(entry.image_id)) problems.push_back(where + ": image_id must match [A-Za-z0-9._-]+");
    entry.feature_path = base_dir / e["feature_path"].get<std::string>();
    if (e.contains("labels_ref") && !e["labels_ref"].is_null()) {
      entry.labels_ref = base_dir / e["labels_ref"].get<std::string>();
    }
    if (e.contains("domain_label") && !e["domain_label"].is_null()) {
      entry.domain_label = domain_from_string(e["domain_label"].get<std::string>());
      if (!entry.domain_label) problems.push_back(where + ": domain_label must be real or synthetic");
    }
    if (e.contains("pair_id") && !e["pair_id"].is_null()) entry.pair_id = e["pair_id"].get<std::string>();
    if (m.find(entry.image_id)) problems.push_back(where + ": duplicate image_id '" + entry.image_id + "'");
    m.entries.push_back(std::move(entry));
  }
  for (const auto& e : m.entries) {
    if (e.pair_id && (!m.find(*e.pair_id) || *e.pair_id == e.image_id)) {
      problems.push_back("'" + e.image_id + "': pair_id '" + *e.pair_id + "' does not name another entry");
    }
  }
  if (!problems.empty()) {
    std::string msg = "invalid manifest:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw ValidationError(msg);
  }
  return m;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  return parse_manifest(detail::read_text_file(path), path.parent_path());
}

std::vector<FeatureRecord> load_manifest_features(const DatasetManifest& m) {
  std::map<std::filesystem::path, std::vector<FeatureRecord>> files;
  std::vector<FeatureRecord> out;
  for (const auto& e : m.entries) {
    auto it = files.find(e.feature_path);
    if (it == files.end()) it = files.emplace(e.feature_path, read_feature_file(e.feature_path)).first;
    auto rec = std::find_if(it->second.begin(), it->second.end(),
                            [&](const FeatureRecord& r) { return r.image_id == e.image_id; });
    if (rec == it->second.end()) {
      throw ValidationError("feature file " + e.feature_path.string() + " has no record for '" + e.image_id + "'");
    }
    FeatureRecord r = *rec;
    if (e.domain_label) {
      if (r.domain_label && *r.domain_label != *e.domain_label) {
        throw ValidationError("'" + e.image_id + "': manifest and feature file disagree on the domain label");
      }
      r.domain_label = e.domain_label;
    }
    out.push_back(std::move(r));
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.image_id < b.image_id; });
  return out;
}

std::vector<TraitLabels> load_manifest_labels(const DatasetManifest& m, const KnowledgeGraph& graph) {
  std::map<std::filesystem::path, std::vector<TraitLabels>> files;
  std::vector<TraitLabels> out;
  for (const auto& e : m.entries) {
    if (!e.labels_ref) continue;
    auto it = files.find(*e.labels_ref);
    if (it == files.end()) it = files.emplace(*e.labels_ref, read_labels_file(*e.labels_ref, &graph)).first;
    auto rec = std::find_if(it->second.begin(), it->second.end(),
                            [&](const TraitLabels& l) { return l.image_id == e.image_id; });
    if (rec != it->second.end()) out.push_back(*rec);
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.image_id < b.image_id; });
  return out;
}

// ---------------------------------------------------------------------------
// Artifacts

ArtifactWriter::ArtifactWriter(std::filesystem::path root, std::string config_sha256)
    : root_(std::move(root)), config_sha_(std::move(config_sha256)) {
  std::error_code ec;
  std::filesystem::create_directories(root_, ec);
  if (ec) throw IoError("cannot create output directory " + root_.string() + ": " + ec.message());
}

void ArtifactWriter::write(const std::string& relative, const std::string& bytes) {
  const std::filesystem::path path = root_ / relative;
  std::error_code ec;
  std::filesystem::create_directories(path.parent_path(), ec);
  if (ec) throw IoError("cannot create " + path.parent_path().string() + ": " + ec.message());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path.string());
  hashes_[relative] = sha256_hex(bytes);
}

void ArtifactWriter::write_provenance() {
  json j;
  j["config_sha256"] = config_sha_;
  j["artifacts"] = json::object();
  for (const auto& [path, hash] : hashes_) j["artifacts"][path] = hash;
  const std::string text = j.dump(2) + "\n";
  std::ofstream out(root_ / "provenance.json", std::ios::binary | std::ios::trunc);
  if (!(out << text)) throw IoError("cannot write provenance.json");
}

void ArtifactWriter::write_run_log(const std::string& command, std::uint64_t seed,
                                   const std::map<std::string, std::string>& extra) {
  json j;
  j["command"] = command;
  j["seed"] = seed;
  j["config_sha256"] = config_sha_;
  j["versions"] = {{"realism", kVersion},
                   {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                         std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                         std::to_string(NLOHMANN_JSON_VERSION_PATCH)}};
  for (const auto& [k, v] : extra) j[k] = v;
  const std::string text = j.dump(2) + "\n";
  std::ofstream out(root_ / "run_log.json", std::ios::binary | std::ios::trunc);
  if (!(out << text)) throw IoError("cannot write run_log.json");
}

// ---------------------------------------------------------------------------
// Pipeline

PipelineSummary run_pipeline(const PipelineConfig& config_in, const DatasetManifest& manifest,
                             const PipelineInputs& inputs) {
  PipelineConfig config = config_in;
  config.propagate_seed();
  config.validate();
  const std::string ontology_text = resolve_ontology_text(config);
  const KnowledgeGraph graph = parse_ontology(ontology_text);
  ArtifactWriter out(config.output_dir, config_hash(config, ontology_text));

  const std::vector<FeatureRecord> features = load_manifest_features(manifest);
  if (features.empty()) throw ValidationError("manifest has no entries");

  TraitHeads heads;
  if (inputs.heads_path) {
    heads = parse_heads(detail::read_text_file(*inputs.heads_path));
  } else {
    HeadConfig hc = config.heads;
    hc.feature_dim = features.front().features.size();
    hc.threads = config.threads;
    heads = train_heads(graph, features, load_manifest_labels(manifest, graph), hc);
  }
  heads.check_against(graph);
  out.write("heads.json", serialize_heads(heads));

  std::vector<TraitVector> traits(features.size());
  parallel_for(features.size(), config.threads,
               [&](std::size_t i) { traits[i] = predict_traits(features[i], heads, config.trait_threshold); });
  std::string traits_text;
  std::unordered_map<std::string, std::size_t> row_of;
  for (std::size_t i = 0; i < features.size(); ++i) {
    traits_text += trait_vector_line(features[i].image_id, traits[i]) + "\n";
    row_of[features[i].image_id] = i;
  }
  out.write("traits.jsonl", traits_text);

  GnnParams gnn;
  if (inputs.gnn_path) {
    gnn = parse_gnn(detail::read_text_file(*inputs.gnn_path));
  } else {
    std::vector<Vector> dataset;
    for (const auto& t : traits) dataset.push_back(t.probabilities);
    gnn = train_gnn(graph, dataset, config.gnn).params;
  }
  out.write("gnn.json", serialize_gnn(gnn));

  const std::vector<RealismEmbedding> embeddings =
      embed_dataset(graph, heads, features, gnn, config.trait_threshold, config.threads);
  std::string embeddings_text;
  for (const auto& e : embeddings) embeddings_text += embedding_line(e) + "\n";
  out.write("embeddings.jsonl", embeddings_text);

  const ConditioningParams cond = inputs.conditioning_path
                                      ? parse_conditioning(detail::read_text_file(*inputs.conditioning_path))
                                      : init_conditioning(graph.size(), gnn.embed_dim(), config.d_attn, config.seed);
  out.write("conditioning.json", serialize_conditioning(cond));

  const StripsDomain domain = compile_domain(graph);
  out.write("domain.pddl", emit_domain_pddl(domain));

  const auto pairs = manifest.pairs();
  std::vector<PlanProblem> problems(pairs.size());
  std::vector<Plan> plans(pairs.size());
  parallel_for(pairs.size(), config.threads, [&](std::size_t i) {
    const auto& s = traits[row_of.at(pairs[i].first)];
    const auto& t = traits[row_of.at(pairs[i].second)];
    problems[i] = diff_states(s.probabilities, t.probabilities, config.trait_threshold, config.strict_goal);
    plans[i] = solve(problems[i], domain);
  });

  PipelineSummary summary;
  summary.images = features.size();
  summary.pairs = pairs.size();
  json pair_index = json::array();
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& [source, target] = pairs[i];
    const std::string dir = "pairs/" + source + "/";
    std::optional<std::string> prompt;
    switch (plans[i].status) {
      case PlanStatus::solved: ++summary.solved; break;
      case PlanStatus::already_satisfied: ++summary.already_satisfied; break;
      case PlanStatus::infeasible: ++summary.infeasible; break;
    }
    if (plans[i].status != PlanStatus::infeasible) prompt = compile_prompt(plans[i], graph).joined;
    out.write(dir + "plan.json", plan_json(plans[i], prompt ? &*prompt : nullptr));
    if (problems[i].constrained() > 0) out.write(dir + "problem.pddl", emit_problem_pddl(domain, problems[i]));
    if (prompt) out.write(dir + "prompt.txt", *prompt + "\n");

    const ConditioningTokens tokens = make_tokens(embeddings[row_of.at(target)], cond);
    out.write(dir + "tokens.bin", encode_tokens(tokens.tokens));
    out.write(dir + "tokens.json", tokens_json(tokens));
    pair_index.push_back({{"source", source}, {"target", target}, {"status", to_string(plans[i].status)}});
  }
  json s;
  s["images"] = summary.images;
  s["pairs"] = pair_index;
  s["solved"] = summary.solved;
  s["already_satisfied"] = summary.already_satisfied;
  s["infeasible"] = summary.infeasible;
  out.write("summary.json", s.dump(2) + "\n");
  out.write_provenance();
  out.write_run_log("pipeline", config.seed);
  return summary;
}

}  // namespace realism
