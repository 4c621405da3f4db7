#include "fedsim/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fedsim/errors.hpp"

namespace fedsim {

std::string to_string(ModelFamily f) {
  switch (f) {
    case ModelFamily::Linear: return "linear";
    case ModelFamily::Logistic: return "logistic";
    case ModelFamily::Mlp: return "mlp";
  }
  return "?";
}

std::string to_string(LossKind k) {
  return k == LossKind::SquaredError ? "squared_error" : "cross_entropy";
}

ModelFamily parse_family(const std::string& s) {
  if (s == "linear") return ModelFamily::Linear;
  if (s == "logistic") return ModelFamily::Logistic;
  if (s == "mlp") return ModelFamily::Mlp;
  throw ConfigError("model.family", "unknown model family '" + s + "' (linear|logistic|mlp)");
}

LossKind parse_loss(const std::string& s) {
  if (s == "squared_error") return LossKind::SquaredError;
  if (s == "cross_entropy") return LossKind::CrossEntropy;
  throw ConfigError("model.loss", "unknown loss '" + s + "' (squared_error|cross_entropy)");
}

ModelSpec ModelSpec::linear(int input_dim, int output_dim, bool bias) {
  ModelSpec s;
  s.family = ModelFamily::Linear;
  s.input_dim = input_dim;
  s.output_dim = output_dim;
  s.loss = LossKind::SquaredError;
  s.bias = bias;
  return s;
}

ModelSpec ModelSpec::logistic(int input_dim, int classes) {
  ModelSpec s;
  s.family = ModelFamily::Logistic;
  s.input_dim = input_dim;
  s.output_dim = classes <= 2 ? 1 : classes;
  s.loss = LossKind::CrossEntropy;
  return s;
}

ModelSpec ModelSpec::mlp(int input_dim, std::vector<int> hidden, int output_dim, LossKind loss) {
  ModelSpec s;
  s.family = ModelFamily::Mlp;
  s.input_dim = input_dim;
  s.hidden_dims = std::move(hidden);
  s.output_dim = output_dim;
  s.loss = loss;
  return s;
}

void ModelSpec::validate() const {
  if (input_dim < 1) throw ConfigError("model.input_dim", "must be >= 1");
  if (output_dim < 1) throw ConfigError("model.output_dim", "must be >= 1");
  if (family == ModelFamily::Linear && loss != LossKind::SquaredError) {
    throw ConfigError("model.loss", "linear models use squared_error");
  }
  if (family == ModelFamily::Logistic && loss != LossKind::CrossEntropy) {
    throw ConfigError("model.loss", "logistic models use cross_entropy");
  }
  if (family != ModelFamily::Mlp && !hidden_dims.empty()) {
    throw ConfigError("model.hidden", "only mlp models have hidden layers");
  }
  for (int h : hidden_dims) {
    if (h < 1) throw ConfigError("model.hidden", "hidden widths must be >= 1");
  }
}

namespace {

std::vector<int> layer_dims(const ModelSpec& spec) {
  std::vector<int> dims{spec.input_dim};
  dims.insert(dims.end(), spec.hidden_dims.begin(), spec.hidden_dims.end());
  dims.push_back(spec.output_dim);
  return dims;
}

struct Net {
  std::vector<int> dims;
  std::vector<std::size_t> weight_offset;
  std::vector<std::size_t> bias_offset;  // meaningful only if bias
  bool bias = true;
  std::size_t layers() const { return dims.size() - 1; }
};

Net make_net(const ModelSpec& spec) {
  Net net;
  net.dims = layer_dims(spec);
  net.bias = spec.bias;
  std::size_t cursor = 0;
  for (std::size_t k = 0; k + 1 < net.dims.size(); ++k) {
    net.weight_offset.push_back(cursor);
    cursor += static_cast<std::size_t>(net.dims[k]) * static_cast<std::size_t>(net.dims[k + 1]);
    net.bias_offset.push_back(cursor);
    if (net.bias) cursor += static_cast<std::size_t>(net.dims[k + 1]);
  }
  return net;
}

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

class Evaluator {
 public:
  Evaluator(const ModelSpec& spec, std::span<const double> w) : spec_(spec), net_(make_net(spec)), w_(w) {
    acts_.resize(net_.dims.size());
    for (std::size_t k = 0; k < net_.dims.size(); ++k) acts_[k].resize(static_cast<std::size_t>(net_.dims[k]));
    delta_.resize(acts_.size());
    for (std::size_t k = 0; k < acts_.size(); ++k) delta_[k].resize(acts_[k].size());
  }

  // Output layer pre-activations for one example; hidden activations cached.
  const std::vector<double>& forward(std::span<const double> x) {
    std::copy(x.begin(), x.end(), acts_[0].begin());
    const std::size_t L = net_.layers();
    for (std::size_t k = 0; k < L; ++k) {
      const std::size_t in = acts_[k].size();
      const std::size_t out = acts_[k + 1].size();
      const double* W = w_.data() + net_.weight_offset[k];
      for (std::size_t r = 0; r < out; ++r) {
        double z = net_.bias ? w_[net_.bias_offset[k] + r] : 0.0;
        for (std::size_t c = 0; c < in; ++c) z += W[r * in + c] * acts_[k][c];
        acts_[k + 1][r] = (k + 1 < L) ? std::tanh(z) : z;
      }
    }
    return acts_.back();
  }

  // Loss of the current forward pass; fills the output delta if requested.
  double output_loss(std::span<const double> y, bool want_delta) {
    const auto& z = acts_.back();
    auto& d = delta_.back();
    if (spec_.loss == LossKind::SquaredError) {
      double l = 0.0;
      for (std::size_t j = 0; j < z.size(); ++j) {
        const double r = z[j] - y[j];
        l += 0.5 * r * r;
        if (want_delta) d[j] = r;
      }
      return l;
    }
    const int label = static_cast<int>(y[0]);
    if (z.size() == 1) {
      if (want_delta) d[0] = sigmoid(z[0]) - label;
      return softplus(z[0]) - label * z[0];
    }
    const double zmax = *std::max_element(z.begin(), z.end());
    double s = 0.0;
    for (double v : z) s += std::exp(v - zmax);
    const double lse = zmax + std::log(s);
    if (want_delta) {
      for (std::size_t j = 0; j < z.size(); ++j) d[j] = std::exp(z[j] - lse) - (static_cast<int>(j) == label ? 1.0 : 0.0);
    }
    return lse - z[static_cast<std::size_t>(label)];
  }

  // Accumulates scale * dloss/dw into grad, using the delta from output_loss.
  void backward(std::span<double> grad, double scale) {
    const std::size_t L = net_.layers();
    for (std::size_t k = L; k-- > 0;) {
      const std::size_t in = acts_[k].size();
      const std::size_t out = acts_[k + 1].size();
      const auto& d = delta_[k + 1];
      double* gW = grad.data() + net_.weight_offset[k];
      for (std::size_t r = 0; r < out; ++r) {
        const double dr = scale * d[r];
        for (std::size_t c = 0; c < in; ++c) gW[r * in + c] += dr * acts_[k][c];
        if (net_.bias) grad[net_.bias_offset[k] + r] += dr;
      }
      if (k == 0) break;
      const double* W = w_.data() + net_.weight_offset[k];
      auto& dp = delta_[k];
      for (std::size_t c = 0; c < in; ++c) {
        double s = 0.0;
        for (std::size_t r = 0; r < out; ++r) s += W[r * in + c] * d[r];
        const double a = acts_[k][c];
        dp[c] = s * (1.0 - a * a);
      }
    }
  }

 private:
  const ModelSpec& spec_;
  Net net_;
  std::span<const double> w_;
  std::vector<std::vector<double>> acts_;
  std::vector<std::vector<double>> delta_;
};

void check_inputs(const ModelSpec& spec, const ParamVector& params, const Batch& batch) {
  if (params.dim() != spec.param_count()) throw StructuralError("parameter count does not match model spec");
  if (batch.input_dim() != spec.input_dim || batch.target_dim() != spec.target_dim()) {
    throw StructuralError("batch dimensions do not match model spec");
  }
  if (batch.empty()) throw DomainError("empty batch");
  if (spec.classification()) {
    const double classes = spec.output_dim == 1 ? 2.0 : spec.output_dim;
    for (double y : batch.targets()) {
      if (y < 0.0 || y >= classes || y != std::floor(y)) throw DomainError("class label out of range");
    }
  }
}

double finite_or_throw(double v, const char* what) {
  if (!std::isfinite(v)) throw NonFiniteError(std::string("non-finite ") + what);
  return v;
}

}  // namespace

std::size_t ModelSpec::param_count() const {
  const auto dims = layer_dims(*this);
  std::size_t n = 0;
  for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
    n += static_cast<std::size_t>(dims[k]) * static_cast<std::size_t>(dims[k + 1]);
    if (bias) n += static_cast<std::size_t>(dims[k + 1]);
  }
  return n;
}

LayoutPtr ModelSpec::layout() const {
  const auto dims = layer_dims(*this);
  std::vector<std::pair<std::string, std::size_t>> sizes;
  for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
    std::size_t n = static_cast<std::size_t>(dims[k]) * static_cast<std::size_t>(dims[k + 1]);
    if (bias) n += static_cast<std::size_t>(dims[k + 1]);
    sizes.emplace_back("layer" + std::to_string(k), n);
  }
  return LayerLayout::from_sizes(sizes);
}

Batch::Batch(int input_dim, int target_dim, std::vector<double> inputs, std::vector<double> targets)
    : input_dim_(input_dim), target_dim_(target_dim), inputs_(std::move(inputs)), targets_(std::move(targets)) {
  if (input_dim < 1 || target_dim < 1) throw StructuralError("batch dimensions must be >= 1");
  if (inputs_.size() % static_cast<std::size_t>(input_dim) != 0) throw StructuralError("ragged batch inputs");
  n_ = inputs_.size() / static_cast<std::size_t>(input_dim);
  if (targets_.size() != n_ * static_cast<std::size_t>(target_dim)) {
    throw StructuralError("batch inputs and targets have different row counts");
  }
  for (double v : inputs_) finite_or_throw(v, "batch input");
  for (double v : targets_) finite_or_throw(v, "batch target");
}

Batch Batch::subset(std::span<const std::size_t> rows) const {
  std::vector<double> xs;
  std::vector<double> ys;
  xs.reserve(rows.size() * static_cast<std::size_t>(input_dim_));
  ys.reserve(rows.size() * static_cast<std::size_t>(target_dim_));
  for (std::size_t r : rows) {
    if (r >= n_) throw StructuralError("batch row out of range");
    auto xr = x(r);
    auto yr = y(r);
    xs.insert(xs.end(), xr.begin(), xr.end());
    ys.insert(ys.end(), yr.begin(), yr.end());
  }
  Batch b;
  b.input_dim_ = input_dim_;
  b.target_dim_ = target_dim_;
  b.n_ = rows.size();
  b.inputs_ = std::move(xs);
  b.targets_ = std::move(ys);
  return b;
}

Batch Batch::slice(std::size_t begin, std::size_t end) const {
  std::vector<std::size_t> rows;
  for (std::size_t r = begin; r < std::min(end, n_); ++r) rows.push_back(r);
  return subset(rows);
}

Batch Batch::concat(const Batch& a, const Batch& b) {
  if (a.empty()) return b;
  if (b.empty()) return a;
  if (a.input_dim_ != b.input_dim_ || a.target_dim_ != b.target_dim_) {
    throw StructuralError("cannot concatenate batches of different shapes");
  }
  Batch out = a;
  out.inputs_.insert(out.inputs_.end(), b.inputs_.begin(), b.inputs_.end());
  out.targets_.insert(out.targets_.end(), b.targets_.begin(), b.targets_.end());
  out.n_ += b.n_;
  return out;
}

ParamVector init_params(const ModelSpec& spec, RngStream& rng) {
  spec.validate();
  const Net net = make_net(spec);
  std::vector<double> w(spec.param_count(), 0.0);
  for (std::size_t k = 0; k < net.layers(); ++k) {
    const double fan_in = net.dims[k];
    const double fan_out = net.dims[k + 1];
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    const std::size_t n = static_cast<std::size_t>(net.dims[k]) * static_cast<std::size_t>(net.dims[k + 1]);
    for (std::size_t i = 0; i < n; ++i) w[net.weight_offset[k] + i] = rng.uniform(-limit, limit);
  }
  return {spec.layout(), std::move(w)};
}

std::vector<double> predict(const ModelSpec& spec, const ParamVector& params, const Batch& batch) {
  if (params.dim() != spec.param_count()) throw StructuralError("parameter count does not match model spec");
  if (batch.input_dim() != spec.input_dim) throw StructuralError("batch input dimension does not match model");
  Evaluator ev(spec, params.values());
  const std::size_t out = static_cast<std::size_t>(spec.output_dim);
  std::vector<double> result(batch.size() * out);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& z = ev.forward(batch.x(i));
    double* o = result.data() + i * out;
    if (!spec.classification()) {
      std::copy(z.begin(), z.end(), o);
    } else if (out == 1) {
      o[0] = sigmoid(z[0]);
    } else {
      const double zmax = *std::max_element(z.begin(), z.end());
      double s = 0.0;
      for (std::size_t j = 0; j < out; ++j) s += (o[j] = std::exp(z[j] - zmax));
      for (std::size_t j = 0; j < out; ++j) o[j] /= s;
    }
  }
  return result;
}

double loss_from_outputs(const ModelSpec& spec, std::span<const double> outputs, const Batch& batch) {
  if (batch.empty()) throw DomainError("empty batch");
  const std::size_t out = static_cast<std::size_t>(spec.output_dim);
  if (outputs.size() != batch.size() * out) throw StructuralError("output size mismatch");
  constexpr double kFloor = 1e-300;
  double total = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const double* o = outputs.data() + i * out;
    const auto y = batch.y(i);
    if (!spec.classification()) {
      for (std::size_t j = 0; j < out; ++j) total += 0.5 * (o[j] - y[j]) * (o[j] - y[j]);
    } else if (out == 1) {
      const double p = o[0];
      total -= y[0] > 0.5 ? std::log(std::max(p, kFloor)) : std::log(std::max(1.0 - p, kFloor));
    } else {
      total -= std::log(std::max(o[static_cast<std::size_t>(y[0])], kFloor));
    }
  }
  return finite_or_throw(total / static_cast<double>(batch.size()), "loss");
}

double accuracy_from_outputs(const ModelSpec& spec, std::span<const double> outputs, const Batch& batch) {
  if (batch.empty()) return 0.0;
  const std::size_t out = static_cast<std::size_t>(spec.output_dim);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const double* o = outputs.data() + i * out;
    const int label = static_cast<int>(batch.y(i)[0]);
    const int pred = out == 1 ? (o[0] >= 0.5 ? 1 : 0)
                              : static_cast<int>(std::max_element(o, o + out) - o);
    correct += pred == label ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(batch.size());
}

double loss(const ModelSpec& spec, const ParamVector& params, const Batch& batch) {
  check_inputs(spec, params, batch);
  Evaluator ev(spec, params.values());
  double total = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    ev.forward(batch.x(i));
    total += ev.output_loss(batch.y(i), false);
  }
  return finite_or_throw(total / static_cast<double>(batch.size()), "loss");
}

LossAndGradient loss_and_gradient(const ModelSpec& spec, const ParamVector& params, const Batch& batch) {
  check_inputs(spec, params, batch);
  Evaluator ev(spec, params.values());
  std::vector<double> g(params.dim(), 0.0);
  const double scale = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    ev.forward(batch.x(i));
    total += ev.output_loss(batch.y(i), true);
    ev.backward(g, scale);
  }
  return {finite_or_throw(total * scale, "loss"), params.with_values(std::move(g))};
}

ParamVector gradient(const ModelSpec& spec, const ParamVector& params, const Batch& batch) {
  return loss_and_gradient(spec, params, batch).grad;
}

ParamVector hvp(const ModelSpec& spec, const ParamVector& params, const Batch& batch, const ParamVector& v) {
  require_same_layout(params, v);
  const double vnorm = v.norm();
  if (vnorm == 0.0) return ParamVector::zeros(params.layout());
  const double eps = std::sqrt(std::numeric_limits<double>::epsilon()) * (1.0 + params.norm()) / std::max(vnorm, 1.0);
  const ParamVector gp = gradient(spec, params.axpy(eps, v), batch);
  const ParamVector gm = gradient(spec, params.axpy(-eps, v), batch);
  return (1.0 / (2.0 * eps)) * (gp - gm);
}

ParamVector fisher_diag(const ModelSpec& spec, const ParamVector& params, const Batch& batch) {
  check_inputs(spec, params, batch);
  Evaluator ev(spec, params.values());
  std::vector<double> acc(params.dim(), 0.0);
  std::vector<double> g(params.dim());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    std::fill(g.begin(), g.end(), 0.0);
    ev.forward(batch.x(i));
    ev.output_loss(batch.y(i), true);
    ev.backward(g, 1.0);
    for (std::size_t j = 0; j < g.size(); ++j) acc[j] += g[j] * g[j];
  }
  for (double& a : acc) a /= static_cast<double>(batch.size());
  return params.with_values(std::move(acc));
}

}  // namespace fedsim
