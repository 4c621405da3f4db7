#include <algorithm>
#include <cmath>
#include <numeric>

#include "fedsim/errors.hpp"
#include "strategies_internal.hpp"

namespace fedsim {

ParamVector qffl_step(std::span<const ParamVector> deltas, std::span<const double> losses,
                      std::span<const double> weights, double q) {
  if (deltas.size() != losses.size() || deltas.size() != weights.size()) {
    throw StructuralError("qffl: deltas, losses and weights differ in length");
  }
  if (q < 0.0) throw DomainError("q must be >= 0");
  std::vector<double> coef(deltas.size());
  for (std::size_t i = 0; i < deltas.size(); ++i) coef[i] = weights[i] * std::pow(std::max(losses[i], 1e-12), q);
  return weighted_average(deltas, coef);
}

std::vector<double> gifair_group_r(std::span<const double> group_losses) {
  std::vector<double> r(group_losses.size(), 0.0);
  for (std::size_t j = 0; j < group_losses.size(); ++j) {
    if (std::isnan(group_losses[j])) continue;
    for (std::size_t k = 0; k < group_losses.size(); ++k) {
      if (std::isnan(group_losses[k])) continue;
      const double d = group_losses[j] - group_losses[k];
      r[j] += d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
    }
  }
  return r;
}

GifairScales gifair_scales(std::span<const std::optional<double>> client_losses, std::span<const int> groups,
                           int group_count, std::span<const double> p, double lambda) {
  const std::size_t n = client_losses.size();
  if (groups.size() != n || p.size() != n) throw StructuralError("gifair: per-client inputs differ in length");
  if (lambda < 0.0) throw DomainError("lambda must be >= 0");
  const auto g = static_cast<std::size_t>(group_count);
  std::vector<double> sum(g, 0.0);
  std::vector<double> known(g, 0.0);
  std::vector<double> size(g, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto s = static_cast<std::size_t>(groups[i]);
    if (s >= g) throw DomainError("gifair: group index out of range");
    size[s] += 1.0;
    if (client_losses[i]) {
      sum[s] += *client_losses[i];
      known[s] += 1.0;
    }
  }
  std::vector<double> mean(g, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t j = 0; j < g; ++j) {
    if (known[j] > 0.0) mean[j] = sum[j] / known[j];
  }
  const std::vector<double> r_group = gifair_group_r(mean);
  GifairScales out;
  for (std::size_t i = 0; i < n; ++i) {
    const auto s = static_cast<std::size_t>(groups[i]);
    const double r = r_group[s];
    double scale = 1.0 + lambda * r / (p[i] * size[s]);
    if (scale < 1e-6) {
      scale = 1e-6;
      out.clamped = true;
    }
    out.r.push_back(r);
    out.scale.push_back(scale);
  }
  return out;
}

std::vector<double> project_simplex(std::span<const double> v) {
  if (v.empty()) throw DomainError("projection of an empty vector");
  std::vector<double> u(v.begin(), v.end());
  std::sort(u.begin(), u.end(), std::greater<>());
  double cum = 0.0;
  double theta = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) {
    cum += u[j];
    const double t = (cum - 1.0) / static_cast<double>(j + 1);
    if (u[j] - t > 0.0) theta = t;
  }
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::max(v[i] - theta, 0.0);
  return out;
}

int argmin_first(std::span<const double> losses) {
  if (losses.empty()) throw DomainError("argmin of an empty list");
  std::size_t best = 0;
  for (std::size_t j = 1; j < losses.size(); ++j) {
    if (losses[j] < losses[best]) best = j;
  }
  return static_cast<int>(best);
}

std::vector<double> cosine_matrix(std::span<const ParamVector> vectors) {
  const std::size_t n = vectors.size();
  std::vector<double> s(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    s[i * n + i] = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) s[i * n + j] = s[j * n + i] = cosine_similarity(vectors[i], vectors[j]);
  }
  return s;
}

std::vector<double> leading_eigenvector(std::span<const double> matrix, std::size_t n, int steps) {
  if (matrix.size() != n * n) throw StructuralError("matrix is not n x n");
  auto normalise = [](std::vector<double>& x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    s = std::sqrt(s);
    if (s > 0.0) {
      for (double& v : x) v /= s;
    }
    return s;
  };
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = static_cast<double>(i + 1);
  normalise(x);
  std::vector<double> y(n);
  bool restarted = false;
  for (int it = 0; it < steps; ++it) {
    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += matrix[i * n + j] * x[j];
      y[i] = acc;
    }
    if (normalise(y) < 1e-300) {
      if (restarted) break;
      restarted = true;  // start vector orthogonal to the range; try e_1
      std::fill(x.begin(), x.end(), 0.0);
      x[0] = 1.0;
      continue;
    }
    x.swap(y);
  }
  return x;
}

std::optional<std::pair<std::vector<int>, std::vector<int>>> cfl_bipartition(std::span<const ParamVector> updates) {
  if (updates.size() < 2) return std::nullopt;
  for (const auto& u : updates) {
    if (u.norm() == 0.0) return std::nullopt;
  }
  const std::vector<double> s = cosine_matrix(updates);
  const std::vector<double> v = leading_eigenvector(s, updates.size());
  std::vector<int> a;
  std::vector<int> b;
  for (std::size_t i = 0; i < v.size(); ++i) (v[i] >= 0.0 ? a : b).push_back(static_cast<int>(i));
  if (a.empty() || b.empty()) return std::nullopt;
  return std::make_pair(std::move(a), std::move(b));
}

namespace detail {
namespace {

// Clients report the loss of the model they received alongside their update.
ClientResult train_and_report(const Message& payload, const ClientState& state, ClientContext& ctx,
                              double grad_scale = 1.0) {
  const ParamVector& w = payload.vec("w");
  const ModelSpec* spec = ctx.spec;
  const double f = loss(*spec, w, ctx.train());
  GradFn grad = loss_grad(ctx);
  if (grad_scale != 1.0) {
    grad = [spec, grad_scale](const ParamVector& x, const Batch& b) { return grad_scale * gradient(*spec, x, b); };
  }
  ClientResult r;
  r.uplink.vectors.emplace("w", sgd_epochs(ctx, w, ctx.config->lr_local, grad));
  r.uplink.scalars["loss"] = f;
  r.state = state;
  return r;
}

class QFfl : public GlobalModelStrategy {
 public:
  explicit QFfl(double q) : q_(q) {}
  std::string name() const override { return "qffl"; }

  ClientResult client_update(const Message& payload, const ClientState& state, ClientContext& ctx) const override {
    return train_and_report(payload, state, ctx);
  }
  void aggregate(int, std::span<const int> selected, std::span<const Message> uplinks) override {
    std::vector<ParamVector> deltas;
    std::vector<double> losses;
    std::vector<double> weights;
    for (std::size_t k = 0; k < uplinks.size(); ++k) {
      deltas.push_back(uplinks[k].vec("w") - *w_);
      losses.push_back(uplinks[k].scalar("loss"));
      weights.push_back(ctx_.client_weights[static_cast<std::size_t>(selected[k])]);
    }
    w_ = w_->axpy(ctx_.config.lr_server, qffl_step(deltas, losses, weights, q_));
  }

 private:
  double q_;
};

class GiFair : public GlobalModelStrategy {
 public:
  GiFair(double lambda, bool individual) : lambda_(lambda), individual_(individual) {}
  std::string name() const override { return "gifair"; }

  void init_server(const ServerContext& ctx) override {
    GlobalModelStrategy::init_server(ctx);
    const std::size_t n = ctx.clients();
    last_loss_.assign(n, std::nullopt);
    groups_.clear();
    for (std::size_t i = 0; i < n; ++i) {
      groups_.push_back(individual_ ? static_cast<int>(i) : ctx.data->clients[i].group);
    }
    group_count_ = individual_ ? static_cast<int>(n) : ctx.data->groups;
    const std::vector<double> sizes = ctx.data->sizes();
    const double total = std::accumulate(sizes.begin(), sizes.end(), 0.0);
    p_.clear();
    for (double s : sizes) p_.push_back(s / total);
  }
  std::vector<Message> round_payload(int, std::span<const int> selected) override {
    scales_ = gifair_scales(last_loss_, groups_, group_count_, p_, lambda_);
    std::vector<Message> out;
    for (int id : selected) {
      Message m;
      m.vectors.emplace("w", *w_);
      m.scalars["scale"] = scales_.scale[static_cast<std::size_t>(id)];
      out.push_back(std::move(m));
    }
    return out;
  }
  ClientResult client_update(const Message& payload, const ClientState& state, ClientContext& ctx) const override {
    return train_and_report(payload, state, ctx, payload.scalar("scale"));
  }
  void aggregate(int, std::span<const int> selected, std::span<const Message> uplinks) override {
    for (std::size_t k = 0; k < selected.size(); ++k) {
      last_loss_[static_cast<std::size_t>(selected[k])] = uplinks[k].scalar("loss");
    }
    step_towards_mean(selected, uplinks);
  }
  json server_diagnostics() const override {
    return {{"gifair_r", scales_.r}, {"gifair_scale", scales_.scale}, {"gifair_clamped", scales_.clamped}};
  }

 private:
  double lambda_;
  bool individual_;
  std::vector<std::optional<double>> last_loss_;
  std::vector<int> groups_;
  int group_count_ = 1;
  std::vector<double> p_;
  GifairScales scales_;
};

class Afl : public GlobalModelStrategy {
 public:
  explicit Afl(double eta_p) : eta_p_(eta_p) {}
  std::string name() const override { return "afl"; }
  bool needs_full_participation() const override { return true; }

  void init_server(const ServerContext& ctx) override {
    GlobalModelStrategy::init_server(ctx);
    p_.assign(ctx.clients(), 1.0 / static_cast<double>(ctx.clients()));
  }
  ClientResult client_update(const Message& payload, const ClientState& state, ClientContext& ctx) const override {
    return train_and_report(payload, state, ctx);
  }
  void aggregate(int, std::span<const int> selected, std::span<const Message> uplinks) override {
    std::vector<double> weights;
    std::vector<double> ascent = p_;
    for (std::size_t k = 0; k < selected.size(); ++k) {
      const auto id = static_cast<std::size_t>(selected[k]);
      weights.push_back(p_[id]);
      ascent[id] += eta_p_ * uplinks[k].scalar("loss");
    }
    const ParamVector mean = weighted_average(collect(uplinks, "w"), weights);
    w_ = w_->axpy(ctx_.config.lr_server, mean - *w_);
    p_ = project_simplex(ascent);
  }
  json server_state() const override {
    json j = GlobalModelStrategy::server_state();
    j["p"] = p_;
    return j;
  }
  json server_diagnostics() const override { return {{"afl_p", p_}}; }

 private:
  double eta_p_;
  std::vector<double> p_;
};

class HypCluster : public Strategy {
 public:
  explicit HypCluster(int clusters) : g_(clusters) {}
  std::string name() const override { return "hypcluster"; }

  void init_server(const ServerContext& ctx) override {
    ctx_ = ctx;
    if (static_cast<std::size_t>(g_) > ctx.clients()) {
      throw ConfigError("strategy.params.clusters", "must not exceed the number of clients");
    }
    models_.clear();
    for (int g = 0; g < g_; ++g) models_.push_back(ctx.init_model(g));
    assignment_.assign(ctx.clients(), -1);
  }
  std::vector<Message> round_payload(int, std::span<const int> selected) override {
    Message m;
    for (int g = 0; g < g_; ++g) m.vectors.emplace("w" + std::to_string(g), models_[static_cast<std::size_t>(g)]);
    return std::vector<Message>(selected.size(), m);
  }
  ClientResult client_update(const Message& payload, const ClientState& state, ClientContext& ctx) const override {
    std::vector<ParamVector> ws;
    for (int g = 0; g < g_; ++g) ws.push_back(payload.vec("w" + std::to_string(g)));
    const int j = choose(ws, ctx);
    ClientResult r;
    r.uplink.vectors.emplace("w",
                             sgd_epochs(ctx, ws[static_cast<std::size_t>(j)], ctx.config->lr_local, loss_grad(ctx)));
    r.uplink.meta["cluster"] = j;
    r.state = state;
    return r;
  }
  void aggregate(int, std::span<const int> selected, std::span<const Message> uplinks) override {
    for (std::size_t k = 0; k < selected.size(); ++k) {
      assignment_[static_cast<std::size_t>(selected[k])] = uplinks[k].flag("cluster");
    }
    for (int g = 0; g < g_; ++g) {
      std::vector<int> ids;
      std::vector<ParamVector> vs;
      for (std::size_t k = 0; k < uplinks.size(); ++k) {
        if (uplinks[k].flag("cluster") != g) continue;
        ids.push_back(selected[k]);
        vs.push_back(uplinks[k].vec("w"));
      }
      if (ids.empty()) continue;  // empty cluster keeps its model
      ParamVector& w = models_[static_cast<std::size_t>(g)];
      w = w.axpy(ctx_.config.lr_server, ctx_.average(ids, vs) - w);
    }
  }
  EvalModel eval_model(const ClientState&, ClientContext& ctx) const override {
    return {{models_[static_cast<std::size_t>(choose(models_, ctx))]}, {}};
  }
  json server_state() const override {
    json models = json::array();
    for (const auto& w : models_) models.push_back(w.to_vector());
    return {{"models", models}, {"assignment", assignment_}};
  }
  json server_diagnostics() const override { return {{"assignment", assignment_}}; }

 private:
  static int choose(const std::vector<ParamVector>& ws, const ClientContext& ctx) {
    std::vector<double> losses;
    for (const auto& w : ws) losses.push_back(loss(*ctx.spec, w, ctx.train()));
    return argmin_first(losses);
  }

  int g_;
  ServerContext ctx_;
  std::vector<ParamVector> models_;
  std::vector<int> assignment_;
};

// Clusters split in two once their mean update has stalled while individual
// updates are still large and point in conflicting directions.
class Cfl : public Strategy {
 public:
  Cfl(double eps1, double eps2, double eps_max) : eps1_(eps1), eps2_(eps2), eps_max_(eps_max) {}
  std::string name() const override { return "cfl"; }

  void init_server(const ServerContext& ctx) override {
    ctx_ = ctx;
    clusters_.clear();
    std::vector<int> all(ctx.clients());
    std::iota(all.begin(), all.end(), 0);
    clusters_.push_back({all, ctx.init_model(0)});
    cluster_of_.assign(ctx.clients(), 0);
    splits_.clear();
  }
  std::vector<Message> round_payload(int, std::span<const int> selected) override {
    std::vector<Message> out;
    for (int id : selected) {
      const int c = cluster_of_[static_cast<std::size_t>(id)];
      Message m;
      m.vectors.emplace("w", clusters_[static_cast<std::size_t>(c)].w);
      m.meta["cluster"] = c;
      out.push_back(std::move(m));
    }
    return out;
  }
  ClientResult client_update(const Message& payload, const ClientState& state, ClientContext& ctx) const override {
    const ParamVector& w = payload.vec("w");
    ClientResult r;
    r.uplink.vectors.emplace("delta", sgd_epochs(ctx, w, ctx.config->lr_local, loss_grad(ctx)) - w);
    r.uplink.meta["cluster"] = payload.flag("cluster");
    r.state = state;
    return r;
  }
  void aggregate(int round, std::span<const int> selected, std::span<const Message> uplinks) override {
    last_split_ = false;
    const std::size_t existing = clusters_.size();
    for (std::size_t c = 0; c < existing; ++c) {
      std::vector<int> ids;
      std::vector<ParamVector> deltas;
      for (std::size_t k = 0; k < uplinks.size(); ++k) {
        if (uplinks[k].flag("cluster") != static_cast<int>(c)) continue;
        ids.push_back(selected[k]);
        deltas.push_back(uplinks[k].vec("delta"));
      }
      if (ids.empty()) continue;
      Cluster& cl = clusters_[c];
      const double scale = std::max(1.0, cl.w.norm());
      const ParamVector mean = ctx_.average(ids, deltas);
      cl.w = cl.w.axpy(ctx_.config.lr_server, mean);
      if (ids.size() != cl.members.size() || ids.size() < 2) continue;
      double max_norm = 0.0;
      for (const auto& d : deltas) max_norm = std::max(max_norm, d.norm());
      if (!(mean.norm() < eps1_ * scale && max_norm > eps_max_ * scale)) continue;
      const auto parts = cfl_bipartition(deltas);
      if (!parts) continue;
      const std::vector<double> sim = cosine_matrix(deltas);
      if (*std::min_element(sim.begin(), sim.end()) >= eps2_) continue;
      std::vector<int> a;
      std::vector<int> b;
      for (int pos : parts->first) a.push_back(ids[static_cast<std::size_t>(pos)]);
      for (int pos : parts->second) b.push_back(ids[static_cast<std::size_t>(pos)]);
      const int child = static_cast<int>(clusters_.size());
      for (int id : b) cluster_of_[static_cast<std::size_t>(id)] = child;
      ParamVector w = cl.w;
      cl.members = a;
      clusters_.push_back({b, std::move(w)});
      splits_.push_back({{"round", round}, {"cluster", c}, {"a", a}, {"b", b}});
      last_split_ = true;
    }
  }
  EvalModel eval_model(const ClientState& state, ClientContext&) const override {
    return {{clusters_[static_cast<std::size_t>(cluster_of_[static_cast<std::size_t>(state.client_id)])].w}, {}};
  }
  json server_state() const override {
    json models = json::array();
    for (const auto& c : clusters_) models.push_back(c.w.to_vector());
    return {{"models", models}, {"assignment", cluster_of_}, {"splits", splits_}};
  }
  json server_diagnostics() const override {
    return {{"cfl_clusters", clusters_.size()}, {"cfl_split", last_split_}};
  }

 private:
  struct Cluster {
    std::vector<int> members;
    ParamVector w;
  };

  double eps1_;
  double eps2_;
  double eps_max_;
  ServerContext ctx_;
  std::vector<Cluster> clusters_;
  std::vector<int> cluster_of_;
  json splits_ = json::array();
  bool last_split_ = false;
};

}  // namespace

std::unique_ptr<Strategy> make_qffl(const HyperParams& p) { return std::make_unique<QFfl>(p.nonnegative("q")); }
std::unique_ptr<Strategy> make_gifair(const HyperParams& p) {
  const std::string groups = p.text("groups");
  if (groups != "dataset" && groups != "individual") p.fail("groups", "expected dataset|individual");
  return std::make_unique<GiFair>(p.nonnegative("lambda"), groups == "individual");
}
std::unique_ptr<Strategy> make_afl(const HyperParams& p) { return std::make_unique<Afl>(p.nonnegative("eta_p")); }
std::unique_ptr<Strategy> make_hypcluster(const HyperParams& p) {
  const int g = p.integer("clusters");
  if (g < 1) p.fail("clusters", "must be >= 1");
  return std::make_unique<HypCluster>(g);
}
std::unique_ptr<Strategy> make_cfl(const HyperParams& p) {
  return std::make_unique<Cfl>(p.positive("eps1"), p.real_in("eps2", -1.0, 1.0), p.nonnegative("eps_max"));
}

}  // namespace detail
}  // namespace fedsim
