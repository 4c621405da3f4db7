#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace fedsim {

struct LayerSpan {
  std::string name;
  std::size_t begin = 0;
  std::size_t end = 0;  // half-open

  std::size_t size() const { return end - begin; }
  bool operator==(const LayerSpan&) const = default;
};

/// Ordered, contiguous, named partition of [0, dim).
class LayerLayout {
 public:
  explicit LayerLayout(std::vector<LayerSpan> entries);

  /// Builds consecutive spans from (name, size) pairs.
  static std::shared_ptr<const LayerLayout> from_sizes(
      const std::vector<std::pair<std::string, std::size_t>>& sizes);
  static std::shared_ptr<const LayerLayout> flat(std::size_t dim, std::string name = "layer0");

  std::size_t dim() const { return dim_; }
  const std::vector<LayerSpan>& entries() const { return entries_; }
  std::size_t index_of(std::string_view name) const;  // throws StructuralError
  const LayerSpan& find(std::string_view name) const { return entries_[index_of(name)]; }

  bool operator==(const LayerLayout& other) const { return entries_ == other.entries_; }

 private:
  std::vector<LayerSpan> entries_;
  std::size_t dim_ = 0;
};

using LayoutPtr = std::shared_ptr<const LayerLayout>;

/// Flat model parameter vector. Every component is finite; construction
/// rejects NaN/Inf with NonFiniteError. Immutable: arithmetic returns new
/// vectors.
class ParamVector {
 public:
  ParamVector(LayoutPtr layout, std::vector<double> values);

  static ParamVector zeros(LayoutPtr layout);
  static ParamVector filled(LayoutPtr layout, double value);

  std::span<const double> values() const { return values_; }
  const std::vector<double>& to_vector() const { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }
  std::size_t dim() const { return values_.size(); }
  const LayoutPtr& layout() const { return layout_; }
  bool same_layout(const ParamVector& other) const;

  ParamVector with_values(std::vector<double> values) const { return {layout_, std::move(values)}; }

  /// this + a * x
  ParamVector axpy(double a, const ParamVector& x) const;
  ParamVector hadamard(const ParamVector& x) const;
  double dot(const ParamVector& x) const;
  double squared_norm() const;
  double norm() const;

  friend ParamVector operator+(const ParamVector& a, const ParamVector& b) { return a.axpy(1.0, b); }
  friend ParamVector operator-(const ParamVector& a, const ParamVector& b) { return a.axpy(-1.0, b); }
  friend ParamVector operator*(double s, const ParamVector& a);
  friend ParamVector operator*(const ParamVector& a, double s) { return s * a; }
  ParamVector operator-() const { return -1.0 * *this; }

 private:
  LayoutPtr layout_;
  std::vector<double> values_;
};

void require_same_layout(const ParamVector& a, const ParamVector& b);

/// sum_k w_k v_k / sum_k w_k, accumulated in input order.
ParamVector weighted_average(std::span<const ParamVector> vectors, std::span<const double> weights);

/// <a,b> / (|a||b|). Zero vectors raise DomainError.
double cosine_similarity(const ParamVector& a, const ParamVector& b);

/// Result of cutting a vector after `boundary_layer`: base holds every layer
/// up to and including it, top the rest. An empty boundary name gives an
/// empty base.
struct ParamSplit {
  LayoutPtr layout;
  std::size_t boundary = 0;  // offset where top begins
  std::vector<double> base;
  std::vector<double> top;
};

ParamSplit split_params(const ParamVector& v, std::string_view boundary_layer);
ParamVector merge_params(const ParamSplit& parts);

}  // namespace fedsim
