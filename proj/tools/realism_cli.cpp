// realism: command-line front end for the trait/graph/plan/token pipeline.
//
// Every subcommand writes its artifacts plus provenance.json and run_log.json
// into --output-dir. Errors go to stderr as one JSON object.
//
// Exit codes: 0 ok, 1 internal, 2 invalid input, 3 infeasible plan,
// 4 capacity (too many traits for the built-in planner).

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include "realism/conditioning.hpp"
#include "realism/error.hpp"
#include "realism/gnn.hpp"
#include "realism/meta_eval.hpp"
#include "realism/metrics.hpp"
#include "realism/parallel.hpp"
#include "realism/pipeline.hpp"
#include "realism/planner.hpp"
#include "realism/prompt.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace realism;

namespace {

constexpr int kExitInternal = 1;
constexpr int kExitInvalid = 2;
constexpr int kExitInfeasible = 3;
constexpr int kExitCapacity = 4;

int fail(const std::string& kind, const std::string& message, int code) {
  json j{{"error", kind}, {"message", message}, {"exit_code", code}};
  std::cerr << j.dump() << "\n";
  return code;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot open " + p.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string flag_for(const std::string& key) {
  std::string f = "--";
  for (char c : key) f += (c == '.' || c == '_') ? '-' : c;
  return f;
}

// Values given on the command line, keyed by config key.
struct Overrides {
  std::map<std::string, std::string> values;
};

struct Context {
  std::string config_path;
  std::size_t threads = 1;
  Overrides overrides;
  PipelineConfig config;
  std::string ontology_text;
  KnowledgeGraph graph;

  // file < OGD_SEED < explicit flags
  void resolve() {
    config = config_path.empty() ? PipelineConfig{} : load_config(config_path);
    apply_seed_override(config);
    for (const auto& [k, v] : overrides.values) set_config_value(config, k, v);
    config.threads = threads;
    config.propagate_seed();
    config.validate();
    ontology_text = resolve_ontology_text(config);
    graph = parse_ontology(ontology_text);
  }

  ArtifactWriter writer() const { return ArtifactWriter(config.output_dir, config_hash(config, ontology_text)); }
};

void finish(ArtifactWriter& out, const Context& ctx, const std::string& command) {
  out.write_provenance();
  out.write_run_log(command, ctx.config.seed);
}

std::vector<FeatureRecord> features_from(const std::string& manifest, const std::string& features) {
  if (!manifest.empty()) return load_manifest_features(load_manifest(manifest));
  if (!features.empty()) {
    auto recs = read_feature_file(features);
    std::sort(recs.begin(), recs.end(), [](const auto& a, const auto& b) { return a.image_id < b.image_id; });
    return recs;
  }
  throw ValidationError("give --manifest or --features");
}

std::vector<std::pair<std::string, TraitVector>> read_traits(const fs::path& path) {
  std::istringstream in(slurp(path));
  std::vector<std::pair<std::string, TraitVector>> out;
  std::string line;
  while (std::getline(in, line))
    if (line.find_first_not_of(" \t\r") != std::string::npos) out.push_back(parse_trait_vector_line(line));
  return out;
}

const TraitVector& trait_of(const std::vector<std::pair<std::string, TraitVector>>& traits, const std::string& id) {
  for (const auto& [i, v] : traits)
    if (i == id) return v;
  throw ValidationError("no trait vector for image '" + id + "'");
}

Vector parse_probs(const std::string& text) {
  Vector v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ValidationError("bad probability '" + item + "'");
    }
  }
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Realism trait graph, planner and conditioning toolkit", "realism"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  app.fallthrough();

  Context ctx;
  app.add_option("--config", ctx.config_path, "JSON config file")->check(CLI::ExistingFile);
  app.add_option("--threads", ctx.threads, "Worker threads (outputs do not depend on it)")->check(CLI::PositiveNumber);
  for (const auto& [key, value] : config_keys(PipelineConfig{})) {
    const std::string k = key;
    app.add_option_function<std::string>(
        flag_for(key), [&ctx, k](const std::string& v) { ctx.overrides.values[k] = v; },
        "config " + key + " (default " + (value.empty() ? "\"\"" : value) + ")");
  }

  // validate-ontology
  auto* validate = app.add_subcommand("validate-ontology", "Check an ontology file and print its size");
  validate->callback([&] {
    ctx.resolve();
    ArtifactWriter out = ctx.writer();
    out.write("ontology.json", serialize_ontology(ctx.graph));
    finish(out, ctx, "validate-ontology");
    std::cout << "ontology ok: N = " << ctx.graph.size() << ", |relations| = " << ctx.graph.relations().size() << "\n";
  });

  // train-heads
  std::string manifest_path, features_path;
  auto* train_heads_cmd = app.add_subcommand("train-heads", "Train one classifier per trait from manifest labels");
  train_heads_cmd->add_option("--manifest", manifest_path, "Dataset manifest")->required()->check(CLI::ExistingFile);
  train_heads_cmd->callback([&] {
    ctx.resolve();
    const auto manifest = load_manifest(manifest_path);
    const auto features = load_manifest_features(manifest);
    if (features.empty()) throw ValidationError("manifest has no entries");
    HeadConfig hc = ctx.config.heads;
    hc.feature_dim = features.front().features.size();
    hc.threads = ctx.threads;
    const TraitHeads heads = train_heads(ctx.graph, features, load_manifest_labels(manifest, ctx.graph), hc);
    ArtifactWriter out = ctx.writer();
    out.write("heads.json", serialize_heads(heads));
    finish(out, ctx, "train-heads");
  });

  // predict-traits
  std::string heads_path;
  auto* predict = app.add_subcommand("predict-traits", "Trait probabilities for every image");
  predict->add_option("--heads", heads_path, "heads.json")->required()->check(CLI::ExistingFile);
  predict->add_option("--manifest", manifest_path, "Dataset manifest")->check(CLI::ExistingFile);
  predict->add_option("--features", features_path, "Feature JSON-lines file")->check(CLI::ExistingFile);
  predict->callback([&] {
    ctx.resolve();
    const TraitHeads heads = parse_heads(slurp(heads_path));
    heads.check_against(ctx.graph);
    const auto features = features_from(manifest_path, features_path);
    std::vector<std::string> lines(features.size());
    parallel_for(features.size(), ctx.threads, [&](std::size_t i) {
      lines[i] = trait_vector_line(features[i].image_id, predict_traits(features[i], heads, ctx.config.trait_threshold));
    });
    std::string text;
    for (const auto& l : lines) text += l + "\n";
    ArtifactWriter out = ctx.writer();
    out.write("traits.jsonl", text);
    finish(out, ctx, "predict-traits");
  });

  // train-gnn
  std::string traits_path;
  auto* train_gnn_cmd = app.add_subcommand("train-gnn", "Fit the graph network on predicted trait vectors");
  train_gnn_cmd->add_option("--traits", traits_path, "traits.jsonl")->required()->check(CLI::ExistingFile);
  train_gnn_cmd->callback([&] {
    ctx.resolve();
    std::vector<Vector> dataset;
    for (const auto& [id, v] : read_traits(traits_path)) {
      if (v.probabilities.size() != ctx.graph.size()) throw ShapeError("trait vector for '" + id + "' has wrong length");
      dataset.push_back(v.probabilities);
    }
    const GnnTrainResult r = train_gnn(ctx.graph, dataset, ctx.config.gnn);
    const Matrix agg = aggregation_matrix(ctx.graph);
    double fit = 0.0;
    for (const auto& p : dataset) fit += edge_fit_error(ctx.graph, gnn_forward(agg, p, r.params));
    json curve{{"loss", r.loss_curve}, {"mean_edge_fit_error", dataset.empty() ? 0.0 : fit / double(dataset.size())}};
    ArtifactWriter out = ctx.writer();
    out.write("gnn.json", serialize_gnn(r.params));
    out.write("gnn_training.json", curve.dump(2) + "\n");
    finish(out, ctx, "train-gnn");
  });

  // embed
  std::string gnn_path;
  auto* embed = app.add_subcommand("embed", "Realism embeddings (N x k per image)");
  embed->add_option("--heads", heads_path, "heads.json")->required()->check(CLI::ExistingFile);
  embed->add_option("--gnn", gnn_path, "gnn.json")->required()->check(CLI::ExistingFile);
  embed->add_option("--manifest", manifest_path, "Dataset manifest")->check(CLI::ExistingFile);
  embed->add_option("--features", features_path, "Feature JSON-lines file")->check(CLI::ExistingFile);
  embed->callback([&] {
    ctx.resolve();
    const auto features = features_from(manifest_path, features_path);
    const auto emb = embed_dataset(ctx.graph, parse_heads(slurp(heads_path)), features, parse_gnn(slurp(gnn_path)),
                                   ctx.config.trait_threshold, ctx.threads);
    std::string text;
    for (const auto& e : emb) text += embedding_line(e) + "\n";
    ArtifactWriter out = ctx.writer();
    out.write("embeddings.jsonl", text);
    finish(out, ctx, "embed");
  });

  // train-meta / eval-meta share the embedding step.
  auto embedded_dataset = [&](const std::vector<FeatureRecord>& features, const TraitHeads& heads,
                              const GnnParams& gnn) {
    MetaDataset d;
    for (const auto& e : embed_dataset(ctx.graph, heads, features, gnn, ctx.config.trait_threshold, ctx.threads)) {
      d.image_ids.push_back(e.source_image_id);
      d.inputs.push_back(flatten_embedding(e));
    }
    for (const auto& f : features) {
      if (!f.domain_label) throw ValidationError("image '" + f.image_id + "' has no domain label");
      d.positive.push_back(*f.domain_label == DomainLabel::real);
    }
    return d;
  };

  auto* train_meta_cmd = app.add_subcommand("train-meta", "Train the real/synthetic meta-classifier on embeddings");
  train_meta_cmd->add_option("--manifest", manifest_path, "Dataset manifest")->required()->check(CLI::ExistingFile);
  train_meta_cmd->add_option("--heads", heads_path, "heads.json")->required()->check(CLI::ExistingFile);
  train_meta_cmd->add_option("--gnn", gnn_path, "gnn.json")->required()->check(CLI::ExistingFile);
  train_meta_cmd->callback([&] {
    ctx.resolve();
    const auto features = load_manifest_features(load_manifest(manifest_path));
    const MetaDataset data = embedded_dataset(features, parse_heads(slurp(heads_path)), parse_gnn(slurp(gnn_path)));
    const Split split = stratified_split(data.positive, ctx.config.meta.test_fraction, ctx.config.seed);
    const MetaClassifier c = train_meta(data, split.train, ctx.config.meta);
    json s;
    for (auto [name, rows] : {std::pair{"train", &split.train}, std::pair{"test", &split.test}}) {
      s[name] = json::array();
      for (std::size_t r : *rows) s[name].push_back(data.image_ids[r]);
    }
    ArtifactWriter out = ctx.writer();
    out.write("meta.json", serialize_meta(c));
    out.write("split.json", s.dump(2) + "\n");
    finish(out, ctx, "train-meta");
  });

  auto* eval_meta_cmd = app.add_subcommand("eval-meta", "Baseline table: raw features, traits only, traits + GNN");
  eval_meta_cmd->add_option("--manifest", manifest_path, "Dataset manifest")->required()->check(CLI::ExistingFile);
  eval_meta_cmd->add_option("--heads", heads_path, "heads.json")->required()->check(CLI::ExistingFile);
  eval_meta_cmd->add_option("--gnn", gnn_path, "gnn.json")->required()->check(CLI::ExistingFile);
  eval_meta_cmd->callback([&] {
    ctx.resolve();
    const auto features = load_manifest_features(load_manifest(manifest_path));
    const TraitHeads heads = parse_heads(slurp(heads_path));
    const GnnParams gnn = parse_gnn(slurp(gnn_path));
    std::vector<std::pair<std::string, TraitVector>> traits;
    for (const auto& f : features) traits.emplace_back(f.image_id, predict_traits(f, heads, ctx.config.trait_threshold));
    const auto emb = embed_dataset(ctx.graph, heads, features, gnn, ctx.config.trait_threshold, ctx.threads);
    const auto reports = run_baselines({features, traits, emb}, ctx.config.meta);
    ArtifactWriter out = ctx.writer();
    out.write("report.json", reports_json(reports));
    out.write("report.txt", reports_table(reports));
    finish(out, ctx, "eval-meta");
    std::cout << reports_table(reports);
  });

  // plan
  std::string source_id, target_id, p_source, p_target, plan_file;
  auto* plan_cmd = app.add_subcommand("plan", "Minimal trait-editing plan from a source to a target image");
  plan_cmd->add_option("--traits", traits_path, "traits.jsonl")->check(CLI::ExistingFile);
  plan_cmd->add_option("--source", source_id, "Source image id");
  plan_cmd->add_option("--target", target_id, "Target image id");
  plan_cmd->add_option("--p-source", p_source, "Comma-separated source probabilities (instead of --traits)");
  plan_cmd->add_option("--p-target", p_target, "Comma-separated target probabilities");
  plan_cmd->add_option("--plan-file", plan_file, "Import an external planner's plan (sas_plan)")
      ->check(CLI::ExistingFile);
  int plan_exit = 0;
  plan_cmd->callback([&] {
    ctx.resolve();
    Vector ps, pt;
    if (!p_source.empty() || !p_target.empty()) {
      ps = parse_probs(p_source);
      pt = parse_probs(p_target);
    } else {
      if (traits_path.empty() || source_id.empty() || target_id.empty()) {
        throw ValidationError("plan needs --traits with --source/--target, or --p-source/--p-target");
      }
      const auto traits = read_traits(traits_path);
      ps = trait_of(traits, source_id).probabilities;
      pt = trait_of(traits, target_id).probabilities;
    }
    if (ps.size() != ctx.graph.size()) throw ShapeError("source vector length differs from the ontology size");
    const PlanProblem problem = diff_states(ps, pt, ctx.config.trait_threshold, ctx.config.strict_goal);
    const StripsDomain domain = compile_domain(ctx.graph);
    const Plan plan = plan_file.empty() ? solve(problem, domain)
                                        : validate_plan(problem, domain, parse_plan_file(slurp(plan_file)));
    std::optional<std::string> prompt;
    if (plan.status != PlanStatus::infeasible) prompt = compile_prompt(plan, ctx.graph).joined;
    ArtifactWriter out = ctx.writer();
    const std::string text = plan_json(plan, prompt ? &*prompt : nullptr);
    out.write("plan.json", text);
    out.write("domain.pddl", emit_domain_pddl(domain));
    if (problem.constrained() > 0) out.write("problem.pddl", emit_problem_pddl(domain, problem));
    finish(out, ctx, "plan");
    std::cout << text;
    if (plan.status == PlanStatus::infeasible) plan_exit = kExitInfeasible;
  });

  // prompt
  std::string plan_path;
  auto* prompt_cmd = app.add_subcommand("prompt", "Natural-language instruction for a plan");
  prompt_cmd->add_option("--plan", plan_path, "plan.json")->required()->check(CLI::ExistingFile);
  prompt_cmd->callback([&] {
    ctx.resolve();
    const Plan plan = parse_plan_json(slurp(plan_path));
    if (plan.status == PlanStatus::infeasible) {
      plan_exit = kExitInfeasible;
      throw ValidationError("plan is infeasible; there is nothing to describe");
    }
    const PromptSpec spec = compile_prompt(plan, ctx.graph);
    ArtifactWriter out = ctx.writer();
    out.write("prompt.txt", spec.joined + "\n");
    finish(out, ctx, "prompt");
    std::cout << spec.joined << "\n";
  });

  // tokens
  std::string embeddings_path, image_id, conditioning_path;
  auto* tokens_cmd = app.add_subcommand("tokens", "Conditioning tokens for one image's embedding");
  tokens_cmd->add_option("--embeddings", embeddings_path, "embeddings.jsonl")->required()->check(CLI::ExistingFile);
  tokens_cmd->add_option("--image", image_id, "Image id")->required();
  tokens_cmd->add_option("--conditioning", conditioning_path, "Existing conditioning params")
      ->check(CLI::ExistingFile);
  tokens_cmd->callback([&] {
    ctx.resolve();
    const auto all = read_embedding_file(embeddings_path);
    auto it = std::find_if(all.begin(), all.end(), [&](const auto& e) { return e.source_image_id == image_id; });
    if (it == all.end()) throw ValidationError("no embedding for image '" + image_id + "'");
    const ConditioningParams params =
        conditioning_path.empty() ? init_conditioning(it->nodes.rows(), it->nodes.cols(), ctx.config.d_attn,
                                                      ctx.config.seed)
                                  : parse_conditioning(slurp(conditioning_path));
    const ConditioningTokens t = make_tokens(*it, params);
    ArtifactWriter out = ctx.writer();
    out.write("conditioning.json", serialize_conditioning(params));
    out.write("tokens/" + image_id + ".bin", encode_tokens(t.tokens));
    out.write("tokens/" + image_id + ".json", tokens_json(t));
    finish(out, ctx, "tokens");
  });

  // metrics
  std::string gen_id, real_id, image_a, image_b, ssim_window = "gaussian";
  auto* metrics_cmd = app.add_subcommand("metrics", "TraitDist between trait vectors and SSIM between images");
  metrics_cmd->add_option("--traits", traits_path, "traits.jsonl")->check(CLI::ExistingFile);
  metrics_cmd->add_option("--generated", gen_id, "Generated image id in --traits");
  metrics_cmd->add_option("--real", real_id, "Real reference image id in --traits");
  metrics_cmd->add_option("--image-a", image_a, "PNG/PPM/PGM image")->check(CLI::ExistingFile);
  metrics_cmd->add_option("--image-b", image_b, "PNG/PPM/PGM image")->check(CLI::ExistingFile);
  metrics_cmd->add_option("--ssim-window", ssim_window, "gaussian | uniform | global");
  metrics_cmd->callback([&] {
    ctx.resolve();
    json m;
    if (!traits_path.empty()) {
      const auto traits = read_traits(traits_path);
      m["trait_dist"] = trait_dist(trait_of(traits, gen_id).probabilities, trait_of(traits, real_id).probabilities);
    }
    if (!image_a.empty() || !image_b.empty()) {
      if (image_a.empty() || image_b.empty()) throw ValidationError("SSIM needs both --image-a and --image-b");
      SsimConfig sc;
      sc.window = ssim_window_from_string(ssim_window);
      m["ssim"] = ssim(load_image(image_a), load_image(image_b), sc);
      m["ssim_window"] = ssim_window;
    }
    if (m.empty()) throw ValidationError("metrics needs --traits with ids, or two images");
    m["lpips"] = nullptr;
    ArtifactWriter out = ctx.writer();
    out.write("metrics.json", m.dump(2) + "\n");
    finish(out, ctx, "metrics");
    std::cout << m.dump(2) << "\n";
  });

  // pipeline
  PipelineInputs inputs;
  std::string in_heads, in_gnn, in_cond;
  auto* pipeline_cmd = app.add_subcommand("pipeline", "traits -> embedding -> plan -> prompt -> tokens for every pair");
  pipeline_cmd->add_option("--manifest", manifest_path, "Dataset manifest")->required()->check(CLI::ExistingFile);
  pipeline_cmd->add_option("--heads", in_heads, "Pre-trained heads.json")->check(CLI::ExistingFile);
  pipeline_cmd->add_option("--gnn", in_gnn, "Pre-trained gnn.json")->check(CLI::ExistingFile);
  pipeline_cmd->add_option("--conditioning", in_cond, "Existing conditioning params")->check(CLI::ExistingFile);
  pipeline_cmd->callback([&] {
    ctx.resolve();
    if (!in_heads.empty()) inputs.heads_path = in_heads;
    if (!in_gnn.empty()) inputs.gnn_path = in_gnn;
    if (!in_cond.empty()) inputs.conditioning_path = in_cond;
    const PipelineSummary s = run_pipeline(ctx.config, load_manifest(manifest_path), inputs);
    std::cout << "pipeline: " << s.images << " images, " << s.pairs << " pairs (" << s.solved << " solved, "
              << s.already_satisfied << " already satisfied, " << s.infeasible << " infeasible)\n";
    if (s.infeasible > 0) plan_exit = kExitInfeasible;
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what(), kExitInvalid);
  } catch (const CapacityError& e) {
    return fail(e.kind(), e.what(), kExitCapacity);
  } catch (const NumericError& e) {
    return fail(e.kind(), e.what(), kExitInternal);
  } catch (const Error& e) {
    return fail(e.kind(), e.what(), plan_exit ? plan_exit : kExitInvalid);
  } catch (const nlohmann::json::exception& e) {
    return fail("parse", e.what(), kExitInvalid);
  } catch (const std::exception& e) {
    return fail("internal", e.what(), kExitInternal);
  }
  return plan_exit;
}
