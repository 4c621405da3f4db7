#include "fedsim/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "fedsim/errors.hpp"
#include "fedsim/rng.hpp"
#include "fedsim/strategies.hpp"

namespace fedsim {

namespace {

constexpr double kStep = 1e-5;

double rel_error(const std::vector<double>& a, const std::vector<double>& b) {
  double diff = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), 1e-2});
}

template <typename F>
std::vector<double> central_difference(const ParamVector& w, F&& f) {
  std::vector<double> out(w.dim());
  std::vector<double> v = w.to_vector();
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double x = v[i];
    v[i] = x + kStep;
    const double up = f(w.with_values(v));
    v[i] = x - kStep;
    const double down = f(w.with_values(v));
    v[i] = x;
    out[i] = (up - down) / (2.0 * kStep);
  }
  return out;
}

Batch random_batch(const ModelSpec& spec, std::size_t n, RngStream& rng) {
  std::vector<double> x(n * static_cast<std::size_t>(spec.input_dim));
  for (double& v : x) v = rng.normal();
  std::vector<double> y(n * static_cast<std::size_t>(spec.target_dim()));
  const int classes = spec.output_dim == 1 ? 2 : spec.output_dim;
  for (double& v : y) v = spec.classification() ? static_cast<double>(rng.index(classes)) : rng.normal();
  return Batch(spec.input_dim, spec.target_dim(), std::move(x), std::move(y));
}

ParamVector random_params(const ModelSpec& spec, RngStream& rng, double scale) {
  std::vector<double> v(spec.param_count());
  for (double& x : v) x = scale * rng.normal();
  return ParamVector(spec.layout(), std::move(v));
}

void corrupt(std::vector<double>& v) {
  if (!v.empty()) v[0] += 1e-2 * std::max(1.0, std::abs(v[0]));
}

}  // namespace

bool GradcheckReport::pass() const {
  return std::all_of(entries.begin(), entries.end(), [](const auto& e) { return e.pass(); });
}

std::vector<std::string> GradcheckReport::failures() const {
  std::vector<std::string> out;
  for (const auto& e : entries) {
    if (!e.pass()) out.push_back(e.family + "/" + e.op);
  }
  return out;
}

std::vector<std::pair<std::string, ModelSpec>> gradcheck_families() {
  return {
      {"linear", ModelSpec::linear(3, 2)},
      {"logistic_binary", ModelSpec::logistic(3, 2)},
      {"logistic_multiclass", ModelSpec::logistic(3, 4)},
      {"mlp_regression", ModelSpec::mlp(3, {5, 4}, 2)},
      {"mlp_classification", ModelSpec::mlp(3, {5}, 3, LossKind::CrossEntropy)},
  };
}

GradcheckReport run_gradcheck(const GradcheckOptions& opt) {
  if (opt.trials < 0) throw ConfigError("trials", "must be >= 0");
  GradcheckReport report;
  if (opt.trials == 0) return report;
  for (const auto& [name, spec] : gradcheck_families()) {
    if (!opt.families.empty() && std::find(opt.families.begin(), opt.families.end(), name) == opt.families.end()) {
      continue;
    }
    GradcheckEntry grad{name, "gradient", opt.trials, 0.0, opt.gradient_tol};
    GradcheckEntry hess{name, "hvp", opt.trials, 0.0, opt.second_order_tol};
    GradcheckEntry meta{name, "meta_gradient", opt.trials, 0.0, opt.second_order_tol};
    GradcheckEntry joint{name, "metasgd_joint", opt.trials, 0.0, opt.second_order_tol};
    for (int t = 0; t < opt.trials; ++t) {
      RngStream rng = rng_substream(opt.seed, "gradcheck:" + name, t, 0);
      const ParamVector w = random_params(spec, rng, 0.5);
      const Batch batch = random_batch(spec, 6, rng);

      std::vector<double> g = gradient(spec, w, batch).to_vector();
      if (opt.corrupt_op == "gradient") corrupt(g);
      const auto g_fd = central_difference(w, [&](const ParamVector& x) { return loss(spec, x, batch); });
      grad.max_rel_error = std::max(grad.max_rel_error, rel_error(g, g_fd));

      // Hessian-vector product projected on random directions u, against a
      // mixed second difference of the loss alone.
      const ParamVector v = random_params(spec, rng, 1.0);
      const ParamVector hv_analytic = hvp(spec, w, batch, v);
      std::vector<double> uhv;
      std::vector<double> uhv_fd;
      const double h = 1e-4;
      for (int k = 0; k < 3; ++k) {
        const ParamVector u = random_params(spec, rng, 1.0);
        uhv.push_back(u.dot(hv_analytic));
        const ParamVector a = w.axpy(h, u);
        const ParamVector b = w.axpy(-h, u);
        uhv_fd.push_back((loss(spec, a.axpy(h, v), batch) - loss(spec, a.axpy(-h, v), batch) -
                          loss(spec, b.axpy(h, v), batch) + loss(spec, b.axpy(-h, v), batch)) /
                         (4.0 * h * h));
      }
      if (opt.corrupt_op == "hvp") corrupt(uhv);
      hess.max_rel_error = std::max(hess.max_rel_error, rel_error(uhv, uhv_fd));

      const double alpha = 0.05;
      const int inner = 1 + t % 2;
      std::vector<double> mg = perfedavg_meta_gradient(spec, w, batch, alpha, MetaOrder::Second, inner).to_vector();
      if (opt.corrupt_op == "meta_gradient") corrupt(mg);
      const auto mg_fd = central_difference(
          w, [&](const ParamVector& x) { return perfedavg_meta_loss(spec, x, batch, alpha, inner); });
      meta.max_rel_error = std::max(meta.max_rel_error, rel_error(mg, mg_fd));

      const Batch val = random_batch(spec, 5, rng);
      std::vector<double> eta_v(spec.param_count());
      for (double& e : eta_v) e = rng.uniform(0.01, 0.1);
      const ParamVector eta(spec.layout(), eta_v);
      const JointGradient jg = metasgd_joint_gradient(spec, w, eta, batch, val);
      std::vector<double> analytic = jg.dw.to_vector();
      analytic.insert(analytic.end(), jg.deta.values().begin(), jg.deta.values().end());
      if (opt.corrupt_op == "metasgd_joint") corrupt(analytic);
      auto numeric = central_difference(w, [&](const ParamVector& x) { return metasgd_meta_loss(spec, x, eta, batch, val); });
      const auto numeric_eta =
          central_difference(eta, [&](const ParamVector& e) { return metasgd_meta_loss(spec, w, e, batch, val); });
      numeric.insert(numeric.end(), numeric_eta.begin(), numeric_eta.end());
      joint.max_rel_error = std::max(joint.max_rel_error, rel_error(analytic, numeric));
    }
    report.entries.push_back(grad);
    report.entries.push_back(hess);
    report.entries.push_back(meta);
    report.entries.push_back(joint);
  }
  return report;
}

}  // namespace fedsim
