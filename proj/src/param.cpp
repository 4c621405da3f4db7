#include "fedsim/param.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "fedsim/errors.hpp"

namespace fedsim {

LayerLayout::LayerLayout(std::vector<LayerSpan> entries) : entries_(std::move(entries)) {
  std::set<std::string> names;
  std::size_t cursor = 0;
  for (const auto& e : entries_) {
    if (e.begin != cursor || e.end < e.begin) {
      throw StructuralError("layer '" + e.name + "' is not contiguous with the previous span");
    }
    if (!names.insert(e.name).second) {
      throw StructuralError("duplicate layer name '" + e.name + "'");
    }
    cursor = e.end;
  }
  dim_ = cursor;
}

std::shared_ptr<const LayerLayout> LayerLayout::from_sizes(
    const std::vector<std::pair<std::string, std::size_t>>& sizes) {
  std::vector<LayerSpan> entries;
  std::size_t cursor = 0;
  for (const auto& [name, n] : sizes) {
    entries.push_back({name, cursor, cursor + n});
    cursor += n;
  }
  return std::make_shared<const LayerLayout>(std::move(entries));
}

std::shared_ptr<const LayerLayout> LayerLayout::flat(std::size_t dim, std::string name) {
  return from_sizes({{std::move(name), dim}});
}

std::size_t LayerLayout::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].name == name) return i;
  }
  throw StructuralError("unknown layer '" + std::string(name) + "'");
}

ParamVector::ParamVector(LayoutPtr layout, std::vector<double> values)
    : layout_(std::move(layout)), values_(std::move(values)) {
  if (!layout_) throw StructuralError("parameter vector without layout");
  if (values_.size() != layout_->dim()) {
    throw StructuralError("parameter vector length " + std::to_string(values_.size()) +
                          " does not match layout dimension " + std::to_string(layout_->dim()));
  }
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i])) {
      throw NonFiniteError("non-finite parameter at index " + std::to_string(i));
    }
  }
}

ParamVector ParamVector::zeros(LayoutPtr layout) { return filled(std::move(layout), 0.0); }

ParamVector ParamVector::filled(LayoutPtr layout, double value) {
  const std::size_t n = layout ? layout->dim() : 0;
  return {std::move(layout), std::vector<double>(n, value)};
}

bool ParamVector::same_layout(const ParamVector& other) const {
  return layout_ == other.layout_ || *layout_ == *other.layout_;
}

void require_same_layout(const ParamVector& a, const ParamVector& b) {
  if (!a.same_layout(b)) throw StructuralError("parameter layouts differ");
}

ParamVector ParamVector::axpy(double a, const ParamVector& x) const {
  require_same_layout(*this, x);
  std::vector<double> out(values_);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += a * x.values_[i];
  return {layout_, std::move(out)};
}

ParamVector ParamVector::hadamard(const ParamVector& x) const {
  require_same_layout(*this, x);
  std::vector<double> out(values_);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= x.values_[i];
  return {layout_, std::move(out)};
}

double ParamVector::dot(const ParamVector& x) const {
  require_same_layout(*this, x);
  double s = 0.0;
  for (std::size_t i = 0; i < values_.size(); ++i) s += values_[i] * x.values_[i];
  return s;
}

double ParamVector::squared_norm() const {
  double s = 0.0;
  for (double v : values_) s += v * v;
  return s;
}

double ParamVector::norm() const { return std::sqrt(squared_norm()); }

ParamVector operator*(double s, const ParamVector& a) {
  std::vector<double> out(a.values_);
  for (double& v : out) v *= s;
  return {a.layout_, std::move(out)};
}

ParamVector weighted_average(std::span<const ParamVector> vectors, std::span<const double> weights) {
  if (vectors.empty()) throw DomainError("weighted_average of an empty list");
  if (vectors.size() != weights.size()) {
    throw StructuralError("weighted_average: vector and weight counts differ");
  }
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw DomainError("weighted_average: negative or non-finite weight");
    total += w;
  }
  if (total <= 0.0) throw DomainError("weighted_average: weights sum to zero");
  const ParamVector& first = vectors.front();
  std::vector<double> acc(first.dim(), 0.0);
  for (std::size_t k = 0; k < vectors.size(); ++k) {
    require_same_layout(first, vectors[k]);
    const auto vals = vectors[k].values();
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += weights[k] * vals[i];
  }
  for (double& v : acc) v /= total;
  return first.with_values(std::move(acc));
}

double cosine_similarity(const ParamVector& a, const ParamVector& b) {
  require_same_layout(a, b);
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) throw DomainError("cosine similarity of a zero vector");
  const double c = a.dot(b) / (na * nb);
  return std::clamp(c, -1.0, 1.0);
}

ParamSplit split_params(const ParamVector& v, std::string_view boundary_layer) {
  ParamSplit out;
  out.layout = v.layout();
  out.boundary = boundary_layer.empty() ? 0 : v.layout()->find(boundary_layer).end;
  const auto vals = v.values();
  out.base.assign(vals.begin(), vals.begin() + static_cast<std::ptrdiff_t>(out.boundary));
  out.top.assign(vals.begin() + static_cast<std::ptrdiff_t>(out.boundary), vals.end());
  return out;
}

ParamVector merge_params(const ParamSplit& parts) {
  if (!parts.layout || parts.base.size() != parts.boundary ||
      parts.base.size() + parts.top.size() != parts.layout->dim()) {
    throw StructuralError("merge: part sizes do not match the layout");
  }
  std::vector<double> vals(parts.base);
  vals.insert(vals.end(), parts.top.begin(), parts.top.end());
  return {parts.layout, std::move(vals)};
}

}  // namespace fedsim
