#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "fedsim/param.hpp"
#include "fedsim/rng.hpp"

namespace fedsim {

enum class ModelFamily { Linear, Logistic, Mlp };
enum class LossKind { SquaredError, CrossEntropy };

std::string to_string(ModelFamily f);
std::string to_string(LossKind k);
ModelFamily parse_family(const std::string& s);
LossKind parse_loss(const std::string& s);

/// Architecture of a small dense model. Hidden layers use tanh.
///
/// Logistic models with output_dim == 1 are binary (sigmoid); with
/// output_dim >= 2 they are multinomial (softmax). Cross-entropy targets are
/// class indices stored as doubles.
struct ModelSpec {
  ModelFamily family = ModelFamily::Linear;
  int input_dim = 1;
  int output_dim = 1;
  std::vector<int> hidden_dims;  // mlp only
  LossKind loss = LossKind::SquaredError;
  bool bias = true;

  static ModelSpec linear(int input_dim, int output_dim = 1, bool bias = true);
  static ModelSpec logistic(int input_dim, int classes);
  static ModelSpec mlp(int input_dim, std::vector<int> hidden, int output_dim,
                       LossKind loss = LossKind::SquaredError);

  void validate() const;  // throws ConfigError
  bool classification() const { return loss == LossKind::CrossEntropy; }
  int target_dim() const { return classification() ? 1 : output_dim; }
  std::size_t param_count() const;
  LayoutPtr layout() const;

  bool operator==(const ModelSpec&) const = default;
};

/// n examples, row-major. Test splits may be empty; training code requires n >= 1.
class Batch {
 public:
  Batch() = default;
  Batch(int input_dim, int target_dim, std::vector<double> inputs, std::vector<double> targets);

  std::size_t size() const { return n_; }
  bool empty() const { return n_ == 0; }
  int input_dim() const { return input_dim_; }
  int target_dim() const { return target_dim_; }
  std::span<const double> x(std::size_t i) const {
    return {inputs_.data() + i * static_cast<std::size_t>(input_dim_), static_cast<std::size_t>(input_dim_)};
  }
  std::span<const double> y(std::size_t i) const {
    return {targets_.data() + i * static_cast<std::size_t>(target_dim_), static_cast<std::size_t>(target_dim_)};
  }
  const std::vector<double>& inputs() const { return inputs_; }
  const std::vector<double>& targets() const { return targets_; }

  Batch subset(std::span<const std::size_t> rows) const;
  Batch slice(std::size_t begin, std::size_t end) const;
  static Batch concat(const Batch& a, const Batch& b);

  bool operator==(const Batch&) const = default;

 private:
  int input_dim_ = 0;
  int target_dim_ = 0;
  std::size_t n_ = 0;
  std::vector<double> inputs_;
  std::vector<double> targets_;
};

/// Xavier-uniform weights, zero biases. Layers are named layer0..layerL.
ParamVector init_params(const ModelSpec& spec, RngStream& rng);

/// Raw model outputs: regression values, or class probabilities for
/// cross-entropy models (n x output_dim, row-major).
std::vector<double> predict(const ModelSpec& spec, const ParamVector& params, const Batch& batch);

/// Mean per-example loss of precomputed outputs (see predict).
double loss_from_outputs(const ModelSpec& spec, std::span<const double> outputs, const Batch& batch);
/// Fraction of correctly classified examples; only meaningful for cross-entropy models.
double accuracy_from_outputs(const ModelSpec& spec, std::span<const double> outputs, const Batch& batch);

/// Mean of per-example losses. Squared error uses the 1/2 convention.
double loss(const ModelSpec& spec, const ParamVector& params, const Batch& batch);

/// Exact gradient of `loss` by backpropagation.
ParamVector gradient(const ModelSpec& spec, const ParamVector& params, const Batch& batch);

struct LossAndGradient {
  double loss;
  ParamVector grad;
};
LossAndGradient loss_and_gradient(const ModelSpec& spec, const ParamVector& params, const Batch& batch);

/// Hessian-vector product by central differences of the gradient.
ParamVector hvp(const ModelSpec& spec, const ParamVector& params, const Batch& batch, const ParamVector& v);

/// Empirical Fisher diagonal: mean of squared per-example gradients.
ParamVector fisher_diag(const ModelSpec& spec, const ParamVector& params, const Batch& batch);

}  // namespace fedsim
