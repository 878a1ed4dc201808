#include "realism/meta_eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <unordered_map>

#include "json_util.hpp"
#include "realism/error.hpp"
#include "realism/rng.hpp"

namespace realism {

using detail::json;

std::string to_string(MetaMethod m) {
  switch (m) {
    case MetaMethod::clip_features: return "clip_features";
    case MetaMethod::end_to_end_cnn_placeholder: return "end_to_end_cnn_placeholder";
    case MetaMethod::traits_only: return "traits_only";
    case MetaMethod::traits_plus_gnn: return "traits_plus_gnn";
  }
  return "traits_plus_gnn";
}

std::string display_name(MetaMethod m) {
  switch (m) {
    case MetaMethod::clip_features: return "CLIP features (linear)";
    case MetaMethod::end_to_end_cnn_placeholder: return "End-to-end CNN";
    case MetaMethod::traits_only: return "Traits only";
    case MetaMethod::traits_plus_gnn: return "Traits + GNN";
  }
  return "";
}

double roc_auc(std::span<const double> scores, const std::vector<bool>& positive) {
  if (scores.size() != positive.size()) throw ShapeError("roc_auc: scores and labels differ in length");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  double rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k)
      if (positive[order[k]]) {
        rank_sum += midrank;
        ++n_pos;
      }
    i = j;
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) throw ValidationError("roc_auc needs both classes in the evaluation set");
  const double np = static_cast<double>(n_pos);
  return (rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(n_neg));
}

EvalReport evaluate_scores(std::span<const double> scores, const std::vector<bool>& positive, double threshold) {
  if (scores.empty()) throw ValidationError("evaluation set is empty");
  if (scores.size() != positive.size()) throw ShapeError("evaluate: scores and labels differ in length");
  EvalReport r;
  r.threshold = threshold;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool predicted = scores[i] >= threshold;
    if (positive[i]) {
      predicted ? ++r.confusion.tp : ++r.confusion.fn;
    } else {
      predicted ? ++r.confusion.fp : ++r.confusion.tn;
    }
  }
  r.accuracy = 100.0 * static_cast<double>(r.confusion.tp + r.confusion.tn) / static_cast<double>(scores.size());
  r.roc_auc = roc_auc(scores, positive);
  return r;
}

Split stratified_split(const std::vector<bool>& positive, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ValidationError("test fraction must lie in (0, 1)");
  Split split;
  for (int cls = 0; cls < 2; ++cls) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < positive.size(); ++i)
      if (positive[i] == (cls == 1)) members.push_back(i);
    Rng rng(seed, 0x73706c6974ULL + static_cast<std::uint64_t>(cls));
    rng.shuffle(std::span<std::size_t>(members));
    std::size_t n_test = 0;
    if (members.size() >= 2) {
      n_test = static_cast<std::size_t>(std::lround(test_fraction * static_cast<double>(members.size())));
      n_test = std::clamp<std::size_t>(n_test, 1, members.size() - 1);
    }
    split.test.insert(split.test.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_test));
    split.train.insert(split.train.end(), members.begin() + static_cast<std::ptrdiff_t>(n_test), members.end());
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

void MetaDataset::validate() const {
  if (inputs.empty()) throw ValidationError("meta dataset is empty");
  if (image_ids.size() != inputs.size() || positive.size() != inputs.size()) {
    throw ShapeError("meta dataset columns differ in length");
  }
  for (const auto& x : inputs)
    if (x.size() != inputs.front().size()) throw ShapeError("meta dataset rows differ in width");
}

Vector flatten_embedding(const RealismEmbedding& e) {
  const auto v = e.nodes.values();
  return Vector(v.begin(), v.end());
}

double MetaClassifier::score(std::span<const double> input) const {
  if (input.size() != shift.size()) {
    throw ShapeError("meta classifier expects " + std::to_string(shift.size()) + " inputs, got " +
                     std::to_string(input.size()));
  }
  Vector x(input.size());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = (input[i] - shift[i]) * scale[i];
  return softmax(mlp_forward(mlp, x))[kRealClass];
}

MetaClassifier train_meta(const MetaDataset& data, std::span<const std::size_t> rows, const MetaConfig& config) {
  data.validate();
  std::size_t n_pos = 0;
  for (std::size_t r : rows) {
    if (r >= data.size()) throw IndexError("meta training row out of range");
    n_pos += data.positive[r] ? 1 : 0;
  }
  if (n_pos == 0 || n_pos == rows.size()) {
    throw ValidationError("meta-classifier training data contains a single class");
  }
  const std::size_t d = data.inputs.front().size();
  const double count = static_cast<double>(rows.size());

  MetaClassifier c;
  c.shift.assign(d, 0.0);
  c.scale.assign(d, 1.0);
  for (std::size_t r : rows)
    for (std::size_t j = 0; j < d; ++j) c.shift[j] += data.inputs[r][j] / count;
  for (std::size_t j = 0; j < d; ++j) {
    double var = 0.0;
    for (std::size_t r : rows) var += std::pow(data.inputs[r][j] - c.shift[j], 2) / count;
    c.scale[j] = var > 1e-12 ? 1.0 / std::sqrt(var) : 1.0;
  }
  std::vector<Vector> xs;
  std::vector<std::size_t> targets;
  std::vector<double> weights;
  const double w_pos = count / (2.0 * static_cast<double>(n_pos));
  const double w_neg = count / (2.0 * (count - static_cast<double>(n_pos)));
  for (std::size_t r : rows) {
    Vector x(d);
    for (std::size_t j = 0; j < d; ++j) x[j] = (data.inputs[r][j] - c.shift[j]) * c.scale[j];
    xs.push_back(std::move(x));
    targets.push_back(data.positive[r] ? kRealClass : 0);
    weights.push_back(data.positive[r] ? w_pos : w_neg);
  }

  std::vector<std::size_t> dims{d};
  dims.insert(dims.end(), config.hidden.begin(), config.hidden.end());
  dims.push_back(2);
  Rng rng(config.seed, 0x6d657461ULL);
  c.mlp = make_mlp(dims, Activation::relu, rng);

  Vector params = flatten(c.mlp);
  AdamState adam(params.size(), config.adam);
  std::vector<std::size_t> order(xs.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t batch = std::max<std::size_t>(1, config.batch_size);
  MlpTrace trace;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      MlpParams grads = zeros_like(c.mlp);
      const double scale = 1.0 / static_cast<double>(end - start);
      for (std::size_t b = start; b < end; ++b) {
        const std::size_t i = order[b];
        const Vector logits = mlp_forward(c.mlp, xs[i], &trace);
        const LossAndGrad ce = cross_entropy(logits, targets[i]);
        mlp_backward(c.mlp, trace, ce.grad, grads, scale * weights[i]);
      }
      adam_step(params, flatten(grads), adam);
      unflatten(c.mlp, params);
    }
  }
  if (!std::all_of(params.begin(), params.end(), [](double v) { return std::isfinite(v); })) {
    throw NumericError("meta-classifier training diverged");
  }
  return c;
}

EvalReport evaluate(const MetaClassifier& classifier, const MetaDataset& data, std::span<const std::size_t> rows,
                    double threshold) {
  if (rows.empty()) throw ValidationError("evaluation set is empty");
  Vector scores;
  std::vector<bool> positive;
  for (std::size_t r : rows) {
    if (r >= data.size()) throw IndexError("meta evaluation row out of range");
    scores.push_back(classifier.score(data.inputs[r]));
    positive.push_back(data.positive[r]);
  }
  return evaluate_scores(scores, positive, threshold);
}

EvalReport run_method(MetaMethod method, const MetaDataset& data, const MetaConfig& config) {
  if (method == MetaMethod::end_to_end_cnn_placeholder) {
    EvalReport r;
    r.method = method;
    r.available = false;
    r.roc_auc = 0.0;
    r.threshold = config.threshold;
    return r;
  }
  data.validate();
  const Split split = stratified_split(data.positive, config.test_fraction, config.seed);
  MetaConfig cfg = config;
  if (method == MetaMethod::clip_features) cfg.hidden.clear();
  const MetaClassifier c = train_meta(data, split.train, cfg);
  EvalReport r = evaluate(c, data, split.test, config.threshold);
  r.method = method;
  return r;
}

std::vector<EvalReport> run_baselines(const BaselineInputs& inputs, const MetaConfig& config) {
  std::unordered_map<std::string, const TraitVector*> traits;
  for (const auto& [id, v] : inputs.trait_vectors) traits[id] = &v;
  std::unordered_map<std::string, const RealismEmbedding*> embeddings;
  for (const auto& e : inputs.embeddings) embeddings[e.source_image_id] = &e;
  if (traits.size() != inputs.features.size() || embeddings.size() != inputs.features.size()) {
    throw ValidationError("baseline inputs are misaligned: " + std::to_string(inputs.features.size()) +
                          " feature records, " + std::to_string(traits.size()) + " trait vectors, " +
                          std::to_string(embeddings.size()) + " embeddings");
  }

  MetaDataset clip, traits_only, with_gnn;
  for (const auto& f : inputs.features) {
    if (!f.domain_label) throw ValidationError("image '" + f.image_id + "' has no domain label");
    auto t = traits.find(f.image_id);
    auto e = embeddings.find(f.image_id);
    if (t == traits.end() || e == embeddings.end()) {
      throw ValidationError("image '" + f.image_id + "' is missing a trait vector or embedding");
    }
    const bool real = *f.domain_label == DomainLabel::real;
    for (MetaDataset* d : {&clip, &traits_only, &with_gnn}) {
      d->image_ids.push_back(f.image_id);
      d->positive.push_back(real);
    }
    clip.inputs.push_back(f.features);
    traits_only.inputs.push_back(t->second->probabilities);
    with_gnn.inputs.push_back(flatten_embedding(*e->second));
  }
  return {run_method(MetaMethod::clip_features, clip, config),
          run_method(MetaMethod::end_to_end_cnn_placeholder, clip, config),
          run_method(MetaMethod::traits_only, traits_only, config),
          run_method(MetaMethod::traits_plus_gnn, with_gnn, config)};
}

std::string reports_json(std::span<const EvalReport> reports) {
  json arr = json::array();
  for (const auto& r : reports) {
    json j;
    j["method"] = to_string(r.method);
    j["available"] = r.available;
    if (r.available) {
      j["accuracy"] = r.accuracy;
      j["roc_auc"] = r.roc_auc;
      j["threshold"] = r.threshold;
      j["confusion"] = {{"tp", r.confusion.tp}, {"fp", r.confusion.fp}, {"tn", r.confusion.tn}, {"fn", r.confusion.fn}};
    }
    arr.push_back(std::move(j));
  }
  return json{{"reports", arr}}.dump(2) + "\n";
}

std::string reports_table(std::span<const EvalReport> reports) {
  std::string out;
  char line[128];
  std::snprintf(line, sizeof line, "%-24s %12s %8s\n", "Method", "Accuracy (%)", "ROC-AUC");
  out += line;
  for (const auto& r : reports) {
    if (r.available) {
      std::snprintf(line, sizeof line, "%-24s %12.1f %8.3f\n", display_name(r.method).c_str(), r.accuracy, r.roc_auc);
    } else {
      std::snprintf(line, sizeof line, "%-24s %12s %8s\n", display_name(r.method).c_str(), "n/a", "n/a");
    }
    out += line;
  }
  return out;
}

std::string serialize_meta(const MetaClassifier& c) {
  json j;
  j["shift"] = detail::vector_to_json(c.shift);
  j["scale"] = detail::vector_to_json(c.scale);
  j["mlp"] = detail::mlp_to_json(c.mlp);
  return j.dump(2) + "\n";
}

MetaClassifier parse_meta(const std::string& text) {
  const json j = detail::parse_json(text, "meta classifier");
  if (!j.contains("shift") || !j.contains("scale") || !j.contains("mlp")) {
    throw ValidationError("meta classifier needs shift, scale and mlp");
  }
  MetaClassifier c{detail::vector_from_json(j["shift"], "shift"), detail::vector_from_json(j["scale"], "scale"),
                   detail::mlp_from_json(j["mlp"], "mlp")};
  if (c.shift.size() != c.scale.size() || c.shift.size() != c.mlp.input_dim()) {
    throw ShapeError("meta classifier normalization does not match its input width");
  }
  return c;
}

}  // namespace realism
