#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fedsim/model.hpp"

namespace fedsim {

struct GradcheckOptions {
  int trials = 100;  // per family and op
  std::uint64_t seed = 0;
  double gradient_tol = 1e-5;
  double second_order_tol = 1e-4;  // hvp, meta-gradient, joint gradient
  std::vector<std::string> families;  // empty: all
  std::string corrupt_op;  // test hook: perturbs this op's analytic result
};

struct GradcheckEntry {
  std::string family;
  std::string op;  // gradient | hvp | meta_gradient | metasgd_joint
  int trials = 0;
  double max_rel_error = 0.0;
  double tol = 0.0;
  bool pass() const { return max_rel_error < tol; }
};

struct GradcheckReport {
  std::vector<GradcheckEntry> entries;
  bool pass() const;
  std::vector<std::string> failures() const;  // "family/op"
};

/// Named model families covered by the checks.
std::vector<std::pair<std::string, ModelSpec>> gradcheck_families();

/// Compares analytic derivatives with central finite differences on random
/// parameters and data. Relative error is |a - b| / max(|a|, |b|, 1e-2)
/// in the Euclidean norm.
GradcheckReport run_gradcheck(const GradcheckOptions& opt);

}  // namespace fedsim
