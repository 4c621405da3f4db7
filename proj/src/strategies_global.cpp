#include <algorithm>
#include <cmath>
#include <numeric>

#include "fedsim/errors.hpp"
#include "strategies_internal.hpp"

namespace fedsim {

ParamVector fedprox_local_gradient(const ModelSpec& spec, const ParamVector& w_i, const ParamVector& w_global,
                                   double mu, const Batch& batch) {
  return gradient(spec, w_i, batch).axpy(mu, w_i - w_global);
}

ParamVector dane_local_gradient(const ModelSpec& spec, const ParamVector& w_i, const ParamVector& w_ref,
                                const ParamVector& grad_i_ref, const ParamVector& grad_global_ref, double mu,
                                const Batch& batch) {
  return gradient(spec, w_i, batch) - (grad_i_ref - grad_global_ref) + mu * (w_i - w_ref);
}

ParamVector scaffold_step(const ParamVector& w, const ParamVector& grad, const ParamVector& c_i,
                          const ParamVector& c, double lr, double rescale) {
  return w.axpy(-lr, (rescale * (grad - c_i)) + c);
}

ParamVector server_adaptive_update(const ParamVector& w, const ParamVector& delta, ServerOptState& state,
                                   ServerOptimizer mode, double lr, double zeta, double eps, double v0) {
  require_same_layout(w, delta);
  const std::size_t n = w.dim();
  const auto d = delta.values();
  std::vector<double> out = w.to_vector();
  if (mode == ServerOptimizer::Momentum) {
    if (state.m.size() != n) state.m.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      state.m[i] = zeta * state.m[i] + d[i];
      out[i] += lr * state.m[i];
    }
    return w.with_values(std::move(out));
  }
  if (state.v.size() != n) state.v.assign(n, v0);
  for (std::size_t i = 0; i < n; ++i) {
    const double d2 = d[i] * d[i];
    if (mode == ServerOptimizer::Adam) {
      state.v[i] = zeta * state.v[i] + (1.0 - zeta) * d2;
    } else {
      const double diff = state.v[i] - d2;
      const double sign = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
      state.v[i] = state.v[i] - (1.0 - zeta) * d2 * sign;
    }
    out[i] += lr * d[i] / (std::sqrt(std::max(state.v[i], 0.0)) + eps);
  }
  return w.with_values(std::move(out));
}

FedAcState fedac_local_step(const ModelSpec& spec, const FedAcState& s, const FedAcHyper& h, const Batch& batch) {
  const ParamVector w_md = h.zeta1 * s.w + (1.0 - h.zeta1) * s.w_ag;
  const ParamVector g = gradient(spec, w_md, batch);
  ParamVector w_ag = w_md.axpy(-h.eta1, g);
  ParamVector w = ((1.0 - h.zeta2) * s.w + h.zeta2 * w_md).axpy(-h.eta2, g);
  return {std::move(w), std::move(w_ag)};
}

double median(std::vector<double> xs) {
  if (xs.empty()) throw DomainError("median of an empty list");
  std::sort(xs.begin(), xs.end());
  const std::size_t m = xs.size() / 2;
  return xs.size() % 2 == 1 ? xs[m] : 0.5 * (xs[m - 1] + xs[m]);
}

bool loadaboost_continue(double loss, std::optional<double> median_loss, int units, int budget_epochs) {
  if (!median_loss) return false;
  if (units >= 3 * budget_epochs) return false;  // 1.5 E' in half-epoch units
  return loss > *median_loss;
}

int ensemble_model_index(std::span<const int> permutation, int client, int round, int models) {
  const long long k = static_cast<long long>(permutation[static_cast<std::size_t>(client)]) + round;
  return static_cast<int>(((k % models) + models) % models);
}

std::vector<double> ensemble_predict(const ModelSpec& spec, std::span<const ParamVector> members, const Batch& batch) {
  if (members.empty()) throw DomainError("ensemble has no members");
  std::vector<double> out;
  for (const auto& m : members) {
    const auto o = predict(spec, m, batch);
    if (out.empty()) out.assign(o.size(), 0.0);
    for (std::size_t i = 0; i < o.size(); ++i) out[i] += o[i];
  }
  for (double& v : out) v /= static_cast<double>(members.size());
  return out;
}

namespace detail {
namespace {

class FedAvg : public LocalSgdStrategy {
 public:
  explicit FedAvg(std::string name = "fedavg") : name_(std::move(name)) {}
  std::string name() const override { return name_; }

 private:
  std::string name_;
};

class FedSgd : public LocalSgdStrategy {
 public:
  std::string name() const override { return "fedsgd"; }
  ClientResult client_update(const Message& payload, const ClientState& state, ClientContext& ctx) const override {
    BatchStream stream(ctx.train(), ctx.config->batch_size, ctx.rng);
    ClientResult r;
    r.uplink.vectors.emplace("w", sgd_steps(stream, payload.vec("w"), 1, ctx.config->lr_local, loss_grad(ctx)));
    r.state = state;
    return r;
  }
};

class FedProx : public LocalSgdStrategy {
 public:
  explicit FedProx(double mu) : mu_(mu) {}
  std::string name() const override { return "fedprox"; }

 protected:
  GradFn local_gradient(const Message& payload, const ClientState&, const ClientContext& ctx) const override {
    const ModelSpec* spec = ctx.spec;
    const ParamVector anchor = payload.vec("w");
    const double mu = mu_;
    return [spec, anchor, mu](const ParamVector& w, const Batch& b) {
      return fedprox_local_gradient(*spec, w, anchor, mu, b);
    };
  }

 private:
  double mu_;
};

class Dane : public LocalSgdStrategy {
 public:
  explicit Dane(double mu) : mu_(mu) {}
  std::string name() const override { return "dane"; }

  bool uses_probe(int) const override { return true; }
  Message probe_payload(int) const override {
    Message m;
    m.vectors.emplace("w", *w_);
    return m;
  }
  Message client_probe(const Message& payload, const ClientState&, ClientContext& ctx) const override {
    Message m;
    m.vectors.emplace("g", gradient(*ctx.spec, payload.vec("w"), ctx.train()));
    return m;
  }
  void absorb_probe(int, std::span<const Message> replies) override {
    std::vector<int> ids(replies.size());
    std::iota(ids.begin(), ids.end(), 0);
    global_grad_ = ctx_.average(ids, collect(replies, "g"));
  }
  std::vector<Message> round_payload(int, std::span<const int> selected) override {
    Message m;
    m.vectors.emplace("w", *w_);
    m.vectors.emplace("g", *global_grad_);
    return std::vector<Message>(selected.size(), m);
  }

 protected:
  GradFn local_gradient(const Message& payload, const ClientState&, const ClientContext& ctx) const override {
    const ModelSpec* spec = ctx.spec;
    const ParamVector ref = payload.vec("w");
    const ParamVector g_global = payload.vec("g");
    const ParamVector g_local = gradient(*spec, ref, ctx.train());
    const double mu = mu_;
    return [=](const ParamVector& w, const Batch& b) {
      return dane_local_gradient(*spec, w, ref, g_local, g_global, mu, b);
    };
  }

 private:
  double mu_;
  std::optional<ParamVector> global_grad_;
};

class Scaffold : public GlobalModelStrategy {
 public:
  Scaffold(std::string name, bool difference, double rescale)
      : name_(std::move(name)), difference_(difference), rescale_(rescale) {}
  std::string name() const override { return name_; }

  void init_server(const ServerContext& ctx) override {
    GlobalModelStrategy::init_server(ctx);
    c_ = ParamVector::zeros(w_->layout());
  }
  ClientState init_client(int id) const override {
    ClientState s{id, {}, {}};
    s.vectors.emplace("c", ParamVector::zeros(w_->layout()));
    return s;
  }
  std::vector<Message> round_payload(int, std::span<const int> selected) override {
    Message m;
    m.vectors.emplace("w", *w_);
    m.vectors.emplace("c", *c_);
    return std::vector<Message>(selected.size(), m);
  }
  ClientResult client_update(const Message& payload, const ClientState& state, ClientContext& ctx) const override {
    const ParamVector& w0 = payload.vec("w");
    const ParamVector& c = payload.vec("c");
    const ParamVector& c_i = state.vec("c");
    BatchStream stream(ctx.train(), ctx.config->batch_size, ctx.rng);
    const std::size_t steps = stream.batches_per_epoch() * static_cast<std::size_t>(ctx.local_epochs);
    const double lr = ctx.config->lr_local;
    ParamVector w = w0;
    for (std::size_t k = 0; k < steps; ++k) {
      const Batch b = stream.next();
      w = scaffold_step(w, gradient(*ctx.spec, w, b), c_i, c, lr, rescale_);
    }
    ParamVector c_new = difference_ ? (c_i - c).axpy(1.0 / (static_cast<double>(steps) * lr), w0 - w)
                                    : gradient(*ctx.spec, w, ctx.train());
    ClientResult r;
    r.state = state;
    r.state.vectors.insert_or_assign("c", c_new);
    r.uplink.vectors.emplace("w", std::move(w));
    r.uplink.vectors.emplace("c", std::move(c_new));
    return r;
  }
  void aggregate(int, std::span<const int> selected, std::span<const Message> uplinks) override {
    const double inv_n = 1.0 / static_cast<double>(ctx_.clients());
    ParamVector c = *c_;
    for (const auto& m : uplinks) c = c.axpy(inv_n, m.vec("c") - *c_);
    c_ = std::move(c);
    step_towards_mean(selected, uplinks);
  }
  json server_state() const override {
    json j = GlobalModelStrategy::server_state();
    j["c"] = c_->to_vector();
    return j;
  }

 private:
  std::string name_;
  bool difference_;
  double rescale_;
  std::optional<ParamVector> c_;
};

// Dynamic regularisation. Each client keeps g_i, its running estimate of
// grad F_i at its last local model; the server tracks h = mean_i g_i over all
// clients, stale entries included.
class FedDyn : public GlobalModelStrategy {
 public:
  explicit FedDyn(double mu) : mu_(mu) {}
  std::string name() const override { return "feddyn"; }

  void init_server(const ServerContext& ctx) override {
    GlobalModelStrategy::init_server(ctx);
    h_ = ParamVector::zeros(w_->layout());
  }
  ClientState init_client(int id) const override {
    ClientState s{id, {}, {}};
    s.vectors.emplace("g", ParamVector::zeros(w_->layout()));
    return s;
  }
  ClientResult client_update(const Message& payload, const ClientState& state, ClientContext& ctx) const override {
    const ParamVector& anchor = payload.vec("w");
    const ParamVector& g_i = state.vec("g");
    const ModelSpec* spec = ctx.spec;
    const double mu = mu_;
    ParamVector w = sgd_epochs(ctx, anchor, ctx.config->lr_local, [&](const ParamVector& x, const Batch& b) {
      return (gradient(*spec, x, b) - g_i).axpy(mu, x - anchor);
    });
    ClientResult r;
    r.state = state;
    r.state.vectors.insert_or_assign("g", g_i.axpy(-mu, w - anchor));
    r.uplink.vectors.emplace("w", std::move(w));
    return r;
  }
  void aggregate(int, std::span<const int> selected, std::span<const Message> uplinks) override {
    const double scale = mu_ / static_cast<double>(ctx_.clients());
    ParamVector h = *h_;
    for (const auto& m : uplinks) h = h.axpy(-scale, m.vec("w") - *w_);
    h_ = std::move(h);
    const ParamVector target = ctx_.average(selected, collect(uplinks, "w")).axpy(-1.0 / mu_, *h_);
    w_ = w_->axpy(ctx_.config.lr_server, target - *w_);
  }
  json server_state() const override {
    json j = GlobalModelStrategy::server_state();
    j["h"] = h_->to_vector();
    return j;
  }

 private:
  double mu_;
  std::optional<ParamVector> h_;
};

// Primal-dual: per client w_i (warm start), lambda_i, and local anchor w0_i.
class FedPd : public GlobalModelStrategy {
 public:
  FedPd(double mu, double p) : mu_(mu), p_(p) {}
  std::string name() const override { return "fedpd"; }
  bool needs_full_participation() const override { return true; }

  ClientState init_client(int id) const override {
    ClientState s{id, {}, {}};
    s.vectors.emplace("lambda", ParamVector::zeros(w_->layout()));
    return s;
  }
  std::vector<Message> round_payload(int round, std::span<const int> selected) override {
    RngStream coin = ctx_.rng("fedpd", round);
    upload_ = p_ == 0.0 || coin.uniform() >= p_;
    Message m;
    if (broadcast_) m.vectors.emplace("w0", *w_);
    m.meta["upload"] = upload_ ? 1 : 0;
    return std::vector<Message>(selected.size(), m);
  }
  ClientResult client_update(const Message& payload, const ClientState& state, ClientContext& ctx) const override {
    const ParamVector w0 = payload.vectors.count("w0") ? payload.vec("w0") : state.vec("w0");
    const ParamVector& lambda = state.vec("lambda");
    const ParamVector start = state.has("w") ? state.vec("w") : w0;
    const ModelSpec* spec = ctx.spec;
    const double mu = mu_;
    ParamVector w = sgd_epochs(ctx, start, ctx.config->lr_local, [&](const ParamVector& x, const Batch& b) {
      return (gradient(*spec, x, b) + lambda).axpy(mu, x - w0);
    });
    ParamVector lambda_new = lambda.axpy(mu, w - w0);
    ParamVector w0_new = w.axpy(1.0 / mu, lambda_new);
    ClientResult r;
    r.state = state;
    if (payload.flag("upload")) r.uplink.vectors.emplace("w0", w0_new);
    r.state.vectors.insert_or_assign("w", std::move(w));
    r.state.vectors.insert_or_assign("lambda", std::move(lambda_new));
    r.state.vectors.insert_or_assign("w0", std::move(w0_new));
    return r;
  }
  void aggregate(int, std::span<const int> selected, std::span<const Message> uplinks) override {
    broadcast_ = upload_;
    if (upload_) step_towards_mean(selected, uplinks, "w0");
  }

 private:
  double mu_;
  double p_;
  bool upload_ = true;
  bool broadcast_ = true;
};

// Operator splitting: each client holds z_i; the server averages all z_i
// (absent clients contribute their last value).
class FedSplit : public GlobalModelStrategy {
 public:
  explicit FedSplit(double mu) : mu_(mu) {}
  std::string name() const override { return "fedsplit"; }

  void init_server(const ServerContext& ctx) override {
    GlobalModelStrategy::init_server(ctx);
    z_.assign(ctx.clients(), *w_);
  }
  ClientResult client_update(const Message& payload, const ClientState& state, ClientContext& ctx) const override {
    const ParamVector& w = payload.vec("w");
    const ParamVector z = state.has("z") ? state.vec("z") : w;
    const ParamVector reflected = 2.0 * w - z;
    const ModelSpec* spec = ctx.spec;
    const double mu = mu_;
    const ParamVector half = sgd_epochs(ctx, w, ctx.config->lr_local, [&](const ParamVector& x, const Batch& b) {
      return gradient(*spec, x, b).axpy(mu, x - reflected);
    });
    ParamVector z_new = z.axpy(2.0, half - w);
    ClientResult r;
    r.state = state;
    r.state.vectors.insert_or_assign("z", z_new);
    r.uplink.vectors.emplace("z", std::move(z_new));
    return r;
  }
  void aggregate(int, std::span<const int> selected, std::span<const Message> uplinks) override {
    for (std::size_t k = 0; k < selected.size(); ++k) {
      z_[static_cast<std::size_t>(selected[k])] = uplinks[k].vec("z");
    }
    std::vector<int> all(ctx_.clients());
    std::iota(all.begin(), all.end(), 0);
    const ParamVector mean = ctx_.average(all, z_);
    w_ = w_->axpy(ctx_.config.lr_server, mean - *w_);
  }

 private:
  double mu_;
  std::vector<ParamVector> z_;
};

class ServerAdaptive : public LocalSgdStrategy {
 public:
  ServerAdaptive(std::string name, ServerOptimizer mode, double zeta, double eps, double v0)
      : name_(std::move(name)), mode_(mode), zeta_(zeta), eps_(eps), v0_(v0) {}
  std::string name() const override { return name_; }

  void aggregate(int, std::span<const int> selected, std::span<const Message> uplinks) override {
    const ParamVector delta = ctx_.average(selected, collect(uplinks, "w")) - *w_;
    w_ = server_adaptive_update(*w_, delta, state_, mode_, ctx_.config.lr_server, zeta_, eps_, v0_);
  }
  json server_state() const override {
    json j = GlobalModelStrategy::server_state();
    if (!state_.v.empty()) j["v"] = state_.v;
    if (!state_.m.empty()) j["m"] = state_.m;
    return j;
  }

 private:
  std::string name_;
  ServerOptimizer mode_;
  double zeta_;
  double eps_;
  double v0_;
  ServerOptState state_;
};

class FedAc : public GlobalModelStrategy {
 public:
  explicit FedAc(FedAcHyper h) : h_(h) {}
  std::string name() const override { return "fedac"; }

  void init_server(const ServerContext& ctx) override {
    GlobalModelStrategy::init_server(ctx);
    w_ag_ = *w_;
  }
  std::vector<Message> round_payload(int, std::span<const int> selected) override {
    Message m;
    m.vectors.emplace("w", *w_);
    m.vectors.emplace("w_ag", *w_ag_);
    return std::vector<Message>(selected.size(), m);
  }
  ClientResult client_update(const Message& payload, const ClientState& state, ClientContext& ctx) const override {
    FedAcState s{payload.vec("w"), payload.vec("w_ag")};
    BatchStream stream(ctx.train(), ctx.config->batch_size, ctx.rng);
    const std::size_t steps = stream.batches_per_epoch() * static_cast<std::size_t>(ctx.local_epochs);
    for (std::size_t k = 0; k < steps; ++k) s = fedac_local_step(*ctx.spec, s, h_, stream.next());
    ClientResult r;
    r.state = state;
    r.uplink.vectors.emplace("w", std::move(s.w));
    r.uplink.vectors.emplace("w_ag", std::move(s.w_ag));
    return r;
  }
  void aggregate(int, std::span<const int> selected, std::span<const Message> uplinks) override {
    const ParamVector ag = ctx_.average(selected, collect(uplinks, "w_ag"));
    w_ag_ = w_ag_->axpy(ctx_.config.lr_server, ag - *w_ag_);
    step_towards_mean(selected, uplinks);
  }
  EvalModel eval_model(const ClientState&, ClientContext&) const override { return {{*w_ag_}, {}}; }
  json server_state() const override {
    json j = GlobalModelStrategy::server_state();
    j["w_ag"] = w_ag_->to_vector();
    return j;
  }

 private:
  FedAcHyper h_;
  std::optional<ParamVector> w_ag_;
};

// Training runs in half-epoch units: ceil(B/2) minibatches, or one full-batch
// step at half the learning rate when an epoch is a single batch.
class LoAdaBoost : public GlobalModelStrategy {
 public:
  std::string name() const override { return "loadaboost"; }

  std::vector<Message> round_payload(int, std::span<const int> selected) override {
    Message m;
    m.vectors.emplace("w", *w_);
    if (median_) m.scalars["median"] = *median_;
    return std::vector<Message>(selected.size(), m);
  }
  ClientResult client_update(const Message& payload, const ClientState& state, ClientContext& ctx) const override {
    BatchStream stream(ctx.train(), ctx.config->batch_size, ctx.rng);
    const std::size_t per_epoch = stream.batches_per_epoch();
    const bool single = per_epoch == 1;
    const std::size_t unit_steps = single ? 1 : (per_epoch + 1) / 2;
    const double lr = single ? 0.5 * ctx.config->lr_local : ctx.config->lr_local;
    const GradFn grad = loss_grad(ctx);
    std::optional<double> med;
    if (payload.scalars.count("median")) med = payload.scalar("median");

    const int budget = ctx.local_epochs;
    ParamVector w = payload.vec("w");
    int units = 0;
    for (; units < budget; ++units) w = sgd_steps(stream, std::move(w), unit_steps, lr, grad);
    double l = loss(*ctx.spec, w, ctx.train());
    while (loadaboost_continue(l, med, units, budget)) {
      w = sgd_steps(stream, std::move(w), unit_steps, lr, grad);
      ++units;
      l = loss(*ctx.spec, w, ctx.train());
    }
    ClientResult r;
    r.state = state;
    r.uplink.vectors.emplace("w", std::move(w));
    r.uplink.scalars["loss"] = l;
    r.diagnostics["epochs"] = 0.5 * units;
    return r;
  }
  void aggregate(int, std::span<const int> selected, std::span<const Message> uplinks) override {
    std::vector<double> losses;
    for (const auto& m : uplinks) losses.push_back(m.scalar("loss"));
    median_ = median(losses);
    step_towards_mean(selected, uplinks);
  }
  json server_diagnostics() const override {
    return median_ ? json{{"loss_median", *median_}} : json::object();
  }

 private:
  std::optional<double> median_;
};

class FedEnsemble : public Strategy {
 public:
  FedEnsemble(int models, double gamma) : k_(models), gamma_(gamma) {}
  std::string name() const override { return "fedensemble"; }

  void init_server(const ServerContext& ctx) override {
    ctx_ = ctx;
    models_.clear();
    for (int k = 0; k < k_; ++k) models_.push_back(ctx.init_model(k));
    perm_.resize(ctx.clients());
    std::iota(perm_.begin(), perm_.end(), 0);
    RngStream rng = ctx.rng("ensemble_permutation");
    rng.shuffle(perm_);
  }
  std::vector<Message> round_payload(int round, std::span<const int> selected) override {
    std::vector<Message> out;
    for (int id : selected) {
      const int k = ensemble_model_index(perm_, id, round, k_);
      Message m;
      m.vectors.emplace("w", models_[static_cast<std::size_t>(k)]);
      m.meta["model"] = k;
      out.push_back(std::move(m));
    }
    return out;
  }
  ClientResult client_update(const Message& payload, const ClientState& state, ClientContext& ctx) const override {
    ClientResult r;
    r.uplink.vectors.emplace("w", sgd_epochs(ctx, payload.vec("w"), ctx.config->lr_local, loss_grad(ctx)));
    r.uplink.meta["model"] = payload.flag("model");
    r.state = state;
    return r;
  }
  void aggregate(int, std::span<const int> selected, std::span<const Message> uplinks) override {
    for (int k = 0; k < k_; ++k) {
      std::vector<int> ids;
      std::vector<ParamVector> vs;
      for (std::size_t j = 0; j < uplinks.size(); ++j) {
        if (uplinks[j].flag("model") != k) continue;
        ids.push_back(selected[j]);
        vs.push_back(uplinks[j].vec("w"));
      }
      if (ids.empty()) continue;
      ParamVector& w = models_[static_cast<std::size_t>(k)];
      w = w.axpy(ctx_.config.lr_server, ctx_.average(ids, vs) - w);
    }
  }
  EvalModel eval_model(const ClientState&, ClientContext& ctx) const override {
    EvalModel m{models_, {}};
    if (gamma_ > 0.0) {
      std::vector<double> neg;
      for (const auto& w : models_) neg.push_back(-loss(*ctx.spec, w, ctx.train()));
      m.weights = adaptive_sampling_probs(neg, gamma_);
    }
    return m;
  }
  json server_state() const override {
    json models = json::array();
    for (const auto& w : models_) models.push_back(w.to_vector());
    return {{"models", models}, {"permutation", perm_}};
  }

 private:
  int k_;
  double gamma_;
  ServerContext ctx_;
  std::vector<ParamVector> models_;
  std::vector<int> perm_;
};

}  // namespace

std::unique_ptr<Strategy> make_fedavg(const HyperParams&) { return std::make_unique<FedAvg>(); }
std::unique_ptr<Strategy> make_fedsgd(const HyperParams&) { return std::make_unique<FedSgd>(); }
std::unique_ptr<Strategy> make_fedprox(const HyperParams& p) { return std::make_unique<FedProx>(p.nonnegative("mu")); }
std::unique_ptr<Strategy> make_dane(const HyperParams& p) { return std::make_unique<Dane>(p.nonnegative("mu")); }

namespace {
std::unique_ptr<Strategy> make_scaffold_named(const HyperParams& p, std::string name) {
  const std::string cv = p.text("control_variate");
  if (cv != "gradient" && cv != "difference") p.fail("control_variate", "expected gradient|difference");
  return std::make_unique<Scaffold>(std::move(name), cv == "difference", p.positive("rescale"));
}
}  // namespace

std::unique_ptr<Strategy> make_scaffold(const HyperParams& p) { return make_scaffold_named(p, "scaffold"); }
std::unique_ptr<Strategy> make_fedsvrg(const HyperParams& p) { return make_scaffold_named(p, "fedsvrg"); }
std::unique_ptr<Strategy> make_feddyn(const HyperParams& p) { return std::make_unique<FedDyn>(p.positive("mu")); }
std::unique_ptr<Strategy> make_fedpd(const HyperParams& p) {
  const double prob = p.real("p");
  if (prob < 0.0 || prob >= 1.0) p.fail("p", "must be in [0, 1)");
  return std::make_unique<FedPd>(p.positive("mu"), prob);
}
std::unique_ptr<Strategy> make_fedsplit(const HyperParams& p) { return std::make_unique<FedSplit>(p.positive("mu")); }

namespace {
double zeta_of(const HyperParams& p) {
  const double z = p.real("zeta");
  if (z < 0.0 || z >= 1.0) p.fail("zeta", "must be in [0, 1)");
  return z;
}
}  // namespace

std::unique_ptr<Strategy> make_fedadam(const HyperParams& p) {
  return std::make_unique<ServerAdaptive>("fedadam", ServerOptimizer::Adam, zeta_of(p), p.positive("eps"),
                                          p.nonnegative("v0"));
}
std::unique_ptr<Strategy> make_fedyogi(const HyperParams& p) {
  return std::make_unique<ServerAdaptive>("fedyogi", ServerOptimizer::Yogi, zeta_of(p), p.positive("eps"),
                                          p.nonnegative("v0"));
}
std::unique_ptr<Strategy> make_fedavgm(const HyperParams& p) {
  return std::make_unique<ServerAdaptive>("fedavgm", ServerOptimizer::Momentum, zeta_of(p), 0.0, 0.0);
}
std::unique_ptr<Strategy> make_fedac(const HyperParams& p) {
  FedAcHyper h{p.real_in("zeta1", 0.0, 1.0), p.real_in("zeta2", 0.0, 1.0), p.positive("eta1"), p.positive("eta2")};
  return std::make_unique<FedAc>(h);
}
std::unique_ptr<Strategy> make_loadaboost(const HyperParams&) { return std::make_unique<LoAdaBoost>(); }
std::unique_ptr<Strategy> make_fedensemble(const HyperParams& p) {
  const int k = p.integer("models");
  if (k < 1) p.fail("models", "must be >= 1");
  return std::make_unique<FedEnsemble>(k, p.nonnegative("personal_gamma"));
}

}  // namespace detail
}  // namespace fedsim
