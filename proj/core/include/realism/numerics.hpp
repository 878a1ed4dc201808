#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "realism/rng.hpp"

namespace realism {

using Vector = std::vector<double>;

// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, Vector data);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);
  static Matrix gaussian(std::size_t rows, std::size_t cols, double stddev, Rng& rng);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  bool all_finite() const;

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  Vector data_;
};

Matrix matmul(const Matrix& a, const Matrix& b);
// aᵀ·b and a·bᵀ without materializing the transpose.
Matrix matmul_tn(const Matrix& a, const Matrix& b);
Matrix matmul_nt(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);

Vector softmax(std::span<const double> logits);

struct LossAndGrad {
  double loss = 0.0;
  Vector grad;
};

// Cross-entropy of softmax(logits) against `target`. A masked sample yields
// zero loss and an all-zero gradient regardless of `target`.
LossAndGrad cross_entropy(std::span<const double> logits, std::size_t target,
                          bool masked = false);

// ---------------------------------------------------------------------------
// Multi-layer perceptron

enum class Activation { relu, tanh, identity };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& name);

// y = x · weight + bias, weight is (in × out).
struct DenseLayer {
  Matrix weight;
  Vector bias;
  bool operator==(const DenseLayer&) const = default;
};

struct MlpParams {
  std::vector<DenseLayer> layers;
  // One entry per hidden layer; the output layer is always linear (logits).
  std::vector<Activation> activations;

  std::size_t input_dim() const;
  std::size_t output_dim() const;
  std::size_t parameter_count() const;
  // Throws ShapeError if layer dimensions don't chain.
  void validate() const;

  bool operator==(const MlpParams&) const = default;
};

// He-style init for relu layers, Glorot otherwise; biases start at zero.
MlpParams make_mlp(std::span<const std::size_t> dims, Activation hidden, Rng& rng);
MlpParams zeros_like(const MlpParams& p);

Vector flatten(const MlpParams& p);
void unflatten(MlpParams& p, std::span<const double> flat);

// Per-layer activations kept for the backward pass.
struct MlpTrace {
  std::vector<Vector> inputs;  // input of each layer
  std::vector<Vector> preacts;  // pre-activation output of each layer
};

Vector mlp_forward(const MlpParams& p, std::span<const double> x, MlpTrace* trace = nullptr);

// Accumulates (scaled by `scale`) parameter gradients into `grads` and returns
// the gradient with respect to the input.
Vector mlp_backward(const MlpParams& p, const MlpTrace& trace,
                    std::span<const double> grad_out, MlpParams& grads, double scale = 1.0);

// ---------------------------------------------------------------------------
// Adam

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamState() = default;
  AdamState(std::size_t parameter_count, AdamConfig config);

  std::size_t step = 0;
  AdamConfig config;
  Vector first_moment;
  Vector second_moment;
};

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state);

// ---------------------------------------------------------------------------
// Finite-difference gradient check

// Returns the loss; when `grad` is non-null it is resized and filled with the
// analytic gradient.
using LossWithGrad = std::function<double(std::span<const double>, Vector*)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  bool passed = true;
};

// Central differences per coordinate. Relative error is
// |analytic - numeric| / max(|analytic|, |numeric|, floor).
GradCheckResult grad_check(const LossWithGrad& loss_fn, std::span<const double> params,
                           double tolerance, double step = 1e-5, double floor = 1e-6);

}  // namespace realism
