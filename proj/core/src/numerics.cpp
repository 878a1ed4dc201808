#include "realism/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "realism/error.hpp"

namespace realism {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, Vector data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw ShapeError("matrix data length " + std::to_string(data_.size()) + " != " +
                     std::to_string(rows) + "x" + std::to_string(cols));
  }
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw ShapeError("ragged matrix literal");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::gaussian(std::size_t rows, std::size_t cols, double stddev, Rng& rng) {
  Matrix m(rows, cols);
  for (double& v : m.data_) v = rng.normal(0.0, stddev);
  return m;
}

bool Matrix::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                     " by " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  }
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto dst = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      auto src = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) dst[j] += aik * src[j];
    }
  }
  return out;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw ShapeError("matmul_tn: row counts differ");
  Matrix out(a.cols(), b.cols());
  for (std::size_t k = 0; k < a.rows(); ++k) {
    auto arow = a.row(k);
    auto brow = b.row(k);
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double aki = arow[i];
      if (aki == 0.0) continue;
      auto dst = out.row(i);
      for (std::size_t j = 0; j < b.cols(); ++j) dst[j] += aki * brow[j];
    }
  }
  return out;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) throw ShapeError("matmul_nt: column counts differ");
  Matrix out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto arow = a.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      auto brow = b.row(j);
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += arow[k] * brow[k];
      out(i, j) = s;
    }
  }
  return out;
}

Matrix transpose(const Matrix& a) {
  Matrix t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

Vector softmax(std::span<const double> logits) {
  if (logits.empty()) throw ShapeError("softmax of empty vector");
  const double peak = *std::max_element(logits.begin(), logits.end());
  Vector out(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - peak);
    total += out[i];
  }
  for (double& v : out) v /= total;
  return out;
}

LossAndGrad cross_entropy(std::span<const double> logits, std::size_t target, bool masked) {
  LossAndGrad r;
  r.grad.assign(logits.size(), 0.0);
  if (masked) return r;
  if (target >= logits.size()) {
    throw IndexError("cross_entropy: class " + std::to_string(target) + " out of range for " +
                     std::to_string(logits.size()) + " logits");
  }
  const double peak = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double l : logits) total += std::exp(l - peak);
  const double log_norm = peak + std::log(total);
  r.loss = log_norm - logits[target];
  for (std::size_t i = 0; i < logits.size(); ++i) r.grad[i] = std::exp(logits[i] - log_norm);
  r.grad[target] -= 1.0;
  return r;
}

// ---------------------------------------------------------------------------

std::string to_string(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    case Activation::identity: return "identity";
  }
  return "identity";
}

Activation activation_from_string(const std::string& name) {
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh;
  if (name == "identity") return Activation::identity;
  throw ValidationError("unknown activation '" + name + "'");
}

std::size_t MlpParams::input_dim() const {
  return layers.empty() ? 0 : layers.front().weight.rows();
}

std::size_t MlpParams::output_dim() const {
  return layers.empty() ? 0 : layers.back().weight.cols();
}

std::size_t MlpParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weight.size() + l.bias.size();
  return n;
}

void MlpParams::validate() const {
  if (layers.empty()) throw ShapeError("mlp has no layers");
  if (activations.size() + 1 != layers.size()) {
    throw ShapeError("mlp needs one activation per hidden layer");
  }
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].bias.size() != layers[i].weight.cols()) {
      throw ShapeError("mlp layer " + std::to_string(i) + " bias length mismatch");
    }
    if (i > 0 && layers[i].weight.rows() != layers[i - 1].weight.cols()) {
      throw ShapeError("mlp layer " + std::to_string(i) + " does not chain");
    }
  }
}

MlpParams make_mlp(std::span<const std::size_t> dims, Activation hidden, Rng& rng) {
  if (dims.size() < 2) throw ShapeError("make_mlp needs at least input and output dims");
  MlpParams p;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    const bool is_hidden = i + 2 < dims.size();
    const double fan_in = static_cast<double>(dims[i]);
    const double fan_out = static_cast<double>(dims[i + 1]);
    const double stddev = (is_hidden && hidden == Activation::relu)
                              ? std::sqrt(2.0 / fan_in)
                              : std::sqrt(2.0 / (fan_in + fan_out));
    p.layers.push_back({Matrix::gaussian(dims[i], dims[i + 1], stddev, rng),
                        Vector(dims[i + 1], 0.0)});
    if (is_hidden) p.activations.push_back(hidden);
  }
  return p;
}

MlpParams zeros_like(const MlpParams& p) {
  MlpParams z = p;
  for (auto& l : z.layers) {
    std::fill(l.weight.values().begin(), l.weight.values().end(), 0.0);
    std::fill(l.bias.begin(), l.bias.end(), 0.0);
  }
  return z;
}

Vector flatten(const MlpParams& p) {
  Vector flat;
  flat.reserve(p.parameter_count());
  for (const auto& l : p.layers) {
    flat.insert(flat.end(), l.weight.values().begin(), l.weight.values().end());
    flat.insert(flat.end(), l.bias.begin(), l.bias.end());
  }
  return flat;
}

void unflatten(MlpParams& p, std::span<const double> flat) {
  if (flat.size() != p.parameter_count()) throw ShapeError("unflatten: parameter count mismatch");
  std::size_t at = 0;
  for (auto& l : p.layers) {
    auto w = l.weight.values();
    std::copy_n(flat.begin() + at, w.size(), w.begin());
    at += w.size();
    std::copy_n(flat.begin() + at, l.bias.size(), l.bias.begin());
    at += l.bias.size();
  }
}

namespace {

double activate(Activation a, double v) {
  switch (a) {
    case Activation::relu: return v > 0.0 ? v : 0.0;
    case Activation::tanh: return std::tanh(v);
    case Activation::identity: return v;
  }
  return v;
}

double activation_slope(Activation a, double pre) {
  switch (a) {
    case Activation::relu: return pre > 0.0 ? 1.0 : 0.0;
    case Activation::tanh: {
      const double t = std::tanh(pre);
      return 1.0 - t * t;
    }
    case Activation::identity: return 1.0;
  }
  return 1.0;
}

}  // namespace

Vector mlp_forward(const MlpParams& p, std::span<const double> x, MlpTrace* trace) {
  if (x.size() != p.input_dim()) {
    throw ShapeError("mlp input has " + std::to_string(x.size()) + " features, expected " +
                     std::to_string(p.input_dim()));
  }
  if (trace) {
    trace->inputs.clear();
    trace->preacts.clear();
  }
  Vector cur(x.begin(), x.end());
  for (std::size_t li = 0; li < p.layers.size(); ++li) {
    const auto& layer = p.layers[li];
    Vector out = layer.bias;
    for (std::size_t i = 0; i < layer.weight.rows(); ++i) {
      const double xi = cur[i];
      if (xi == 0.0) continue;
      auto w = layer.weight.row(i);
      for (std::size_t j = 0; j < out.size(); ++j) out[j] += xi * w[j];
    }
    if (trace) {
      trace->inputs.push_back(cur);
      trace->preacts.push_back(out);
    }
    if (li < p.activations.size()) {
      for (double& v : out) v = activate(p.activations[li], v);
    }
    cur = std::move(out);
  }
  return cur;
}

Vector mlp_backward(const MlpParams& p, const MlpTrace& trace, std::span<const double> grad_out,
                    MlpParams& grads, double scale) {
  if (trace.inputs.size() != p.layers.size()) throw ShapeError("mlp_backward: stale trace");
  if (grad_out.size() != p.output_dim()) throw ShapeError("mlp_backward: gradient size mismatch");
  Vector delta(grad_out.begin(), grad_out.end());
  for (std::size_t li = p.layers.size(); li-- > 0;) {
    const auto& layer = p.layers[li];
    auto& g = grads.layers[li];
    if (li < p.activations.size()) {
      const auto& pre = trace.preacts[li];
      for (std::size_t j = 0; j < delta.size(); ++j) delta[j] *= activation_slope(p.activations[li], pre[j]);
    }
    const auto& in = trace.inputs[li];
    for (std::size_t j = 0; j < delta.size(); ++j) g.bias[j] += scale * delta[j];
    Vector next(in.size(), 0.0);
    for (std::size_t i = 0; i < in.size(); ++i) {
      auto w = layer.weight.row(i);
      auto gw = g.weight.row(i);
      const double xi = scale * in[i];
      double acc = 0.0;
      for (std::size_t j = 0; j < delta.size(); ++j) {
        gw[j] += xi * delta[j];
        acc += w[j] * delta[j];
      }
      next[i] = acc;
    }
    delta = std::move(next);
  }
  return delta;
}

// ---------------------------------------------------------------------------

AdamState::AdamState(std::size_t parameter_count, AdamConfig cfg)
    : config(cfg), first_moment(parameter_count, 0.0), second_moment(parameter_count, 0.0) {
  if (!(config.beta1 >= 0.0 && config.beta1 < 1.0 && config.beta2 >= 0.0 && config.beta2 < 1.0)) {
    throw ValidationError("adam betas must lie in [0, 1)");
  }
  if (!(config.epsilon > 0.0)) throw ValidationError("adam epsilon must be positive");
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state) {
  if (params.size() != grads.size() || params.size() != state.first_moment.size() ||
      params.size() != state.second_moment.size()) {
    throw ShapeError("adam_step: parameter/gradient/state sizes differ");
  }
  const auto& c = state.config;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    double& m = state.first_moment[i];
    double& v = state.second_moment[i];
    m = c.beta1 * m + (1.0 - c.beta1) * grads[i];
    v = c.beta2 * v + (1.0 - c.beta2) * grads[i] * grads[i];
    const double m_hat = m / correction1;
    const double v_hat = v / correction2;
    params[i] -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
  }
}

// ---------------------------------------------------------------------------

GradCheckResult grad_check(const LossWithGrad& loss_fn, std::span<const double> params,
                           double tolerance, double step, double floor) {
  Vector theta(params.begin(), params.end());
  Vector analytic;
  const double base = loss_fn(theta, &analytic);
  if (!std::isfinite(base)) throw NumericError("grad_check: loss is not finite");
  if (analytic.size() != theta.size()) throw ShapeError("grad_check: gradient size mismatch");

  GradCheckResult result;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double saved = theta[i];
    theta[i] = saved + step;
    const double plus = loss_fn(theta, nullptr);
    theta[i] = saved - step;
    const double minus = loss_fn(theta, nullptr);
    theta[i] = saved;
    if (!std::isfinite(plus) || !std::isfinite(minus)) {
      throw NumericError("grad_check: loss is not finite at coordinate " + std::to_string(i));
    }
    const double numeric = (plus - minus) / (2.0 * step);
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), floor});
    const double rel = std::abs(analytic[i] - numeric) / denom;
    if (rel > result.max_rel_error) {
      result.max_rel_error = rel;
      result.worst_index = i;
    }
  }
  result.passed = result.max_rel_error <= tolerance;
  return result;
}

}  // namespace realism
