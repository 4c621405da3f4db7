#include <algorithm>
#include <cmath>
#include <numeric>

#include "fedsim/errors.hpp"
#include "strategies_internal.hpp"

namespace fedsim {

TtpVariant parse_ttp_variant(const std::string& s) {
  if (s == "plain") return TtpVariant::Plain;
  if (s == "prox") return TtpVariant::Prox;
  if (s == "ewc") return TtpVariant::Ewc;
  throw ConfigError("strategy.params.variant", "expected plain|prox|ewc, got '" + s + "'");
}

ParamVector ttp_finetune(const ModelSpec& spec, const ParamVector& w_star, const std::vector<Batch>& batches,
                         double lr, TtpVariant variant, double mu, const std::optional<ParamVector>& fisher) {
  if (variant == TtpVariant::Ewc && !fisher) throw StructuralError("ewc fine-tuning needs a Fisher diagonal");
  ParamVector beta = w_star;
  for (const Batch& b : batches) {
    ParamVector g = gradient(spec, beta, b);
    if (variant == TtpVariant::Prox) g = g.axpy(mu, beta - w_star);
    if (variant == TtpVariant::Ewc) g = g.axpy(mu, fisher->hadamard(beta - w_star));
    beta = beta.axpy(-lr, g);
  }
  return beta;
}

ParamVector apfl_local_gradient(const ModelSpec& spec, const ParamVector& beta, const ParamVector& w_star,
                                double zeta, const Batch& batch) {
  const ParamVector mixed = zeta * beta + (1.0 - zeta) * w_star;
  return zeta * gradient(spec, mixed, batch);
}

double pfedme_residual(const ModelSpec& spec, const ParamVector& beta, const ParamVector& w, const Batch& batch,
                       double mu) {
  const ParamVector target = w.axpy(-1.0 / mu, gradient(spec, beta, batch));
  return (beta - target).norm();
}

MoreauSolve pfedme_inner_solve(const ModelSpec& spec, const ParamVector& w, const Batch& batch, double mu, double lr,
                               double tol, int max_steps, const std::optional<ParamVector>& start) {
  ParamVector beta = start ? *start : w;
  int steps = 0;
  for (; steps < max_steps; ++steps) {
    const ParamVector g = gradient(spec, beta, batch).axpy(mu, beta - w);
    if (g.norm() <= tol) break;
    beta = beta.axpy(-lr, g);
  }
  const double r = pfedme_residual(spec, beta, w, batch, mu);
  return {std::move(beta), r, steps};
}

ParamVector l2gd_mix(const ParamVector& beta, const ParamVector& mean, double alpha, double mu, std::size_t clients,
                     double p) {
  const double theta = alpha * mu / (static_cast<double>(clients) * p);
  return (1.0 - theta) * beta + theta * mean;
}

MetaOrder parse_meta_order(const std::string& s) {
  if (s == "second") return MetaOrder::Second;
  if (s == "first") return MetaOrder::First;
  throw ConfigError("strategy.params.order", "expected second|first, got '" + s + "'");
}

double perfedavg_meta_loss(const ModelSpec& spec, const ParamVector& w, const Batch& batch, double alpha,
                           int inner_steps) {
  ParamVector x = w;
  for (int j = 0; j < inner_steps; ++j) x = x.axpy(-alpha, gradient(spec, x, batch));
  return loss(spec, x, batch);
}

ParamVector perfedavg_meta_gradient(const ModelSpec& spec, const ParamVector& w, const Batch& batch, double alpha,
                                    MetaOrder order, int inner_steps) {
  if (inner_steps < 0) throw DomainError("inner_steps must be >= 0");
  std::vector<ParamVector> path{w};
  for (int j = 0; j < inner_steps; ++j) path.push_back(path.back().axpy(-alpha, gradient(spec, path.back(), batch)));
  ParamVector g = gradient(spec, path.back(), batch);
  if (order == MetaOrder::First || alpha == 0.0) return g;
  for (int j = inner_steps - 1; j >= 0; --j) {
    g = g.axpy(-alpha, hvp(spec, path[static_cast<std::size_t>(j)], batch, g));
  }
  return g;
}

double metasgd_meta_loss(const ModelSpec& spec, const ParamVector& w, const ParamVector& eta, const Batch& train,
                         const Batch& val) {
  const ParamVector adapted = w - eta.hadamard(gradient(spec, w, train));
  return loss(spec, adapted, val);
}

JointGradient metasgd_joint_gradient(const ModelSpec& spec, const ParamVector& w, const ParamVector& eta,
                                     const Batch& train, const Batch& val) {
  require_same_layout(w, eta);
  const ParamVector g_train = gradient(spec, w, train);
  const ParamVector adapted = w - eta.hadamard(g_train);
  const ParamVector g_val = gradient(spec, adapted, val);
  ParamVector dw = g_val - hvp(spec, w, train, eta.hadamard(g_val));
  ParamVector deta = -g_train.hadamard(g_val);
  return {std::move(dw), std::move(deta)};
}

namespace detail {
namespace {

ClientContext personal_ctx(const ClientContext& ctx) {
  ClientContext c = ctx;
  c.rng = derive(ctx.rng, "personal");
  return c;
}

class Ttp : public LocalSgdStrategy {
 public:
  Ttp(TtpVariant variant, int steps, double mu, std::optional<double> lr)
      : variant_(variant), steps_(steps), mu_(mu), lr_(lr) {}
  std::string name() const override { return "ttp"; }

  EvalModel eval_model(const ClientState&, ClientContext& ctx) const override {
    BatchStream stream(ctx.train(), ctx.config->batch_size, ctx.rng);
    std::vector<Batch> batches;
    for (int s = 0; s < steps_; ++s) batches.push_back(stream.next());
    std::optional<ParamVector> fisher;
    if (variant_ == TtpVariant::Ewc) fisher = fisher_diag(*ctx.spec, *w_, ctx.train());
    return {{ttp_finetune(*ctx.spec, *w_, batches, lr_.value_or(ctx.config->lr_local), variant_, mu_, fisher)}, {}};
  }

 private:
  TtpVariant variant_;
  int steps_;
  double mu_;
  std::optional<double> lr_;
};

// Every client trains its own model; nothing is exchanged.
class LocalOnly : public Strategy {
 public:
  std::string name() const override { return "local"; }
  void init_server(const ServerContext& ctx) override { init_ = ctx.init_model(0); }
  ClientState init_client(int id) const override {
    ClientState s{id, {}, {}};
    s.vectors.emplace("beta", *init_);
    return s;
  }
  std::vector<Message> round_payload(int, std::span<const int> selected) override {
    return std::vector<Message>(selected.size());
  }
  ClientResult client_update(const Message&, const ClientState& state, ClientContext& ctx) const override {
    ClientContext pc = personal_ctx(ctx);
    ClientResult r;
    r.state = state;
    r.state.vectors.insert_or_assign("beta", sgd_epochs(pc, state.vec("beta"), ctx.config->lr_local, loss_grad(ctx)));
    return r;
  }
  void aggregate(int, std::span<const int>, std::span<const Message>) override {}
  EvalModel eval_model(const ClientState& state, ClientContext&) const override { return {{state.vec("beta")}, {}}; }

 private:
  std::optional<ParamVector> init_;
};

class Ditto : public LocalSgdStrategy {
 public:
  explicit Ditto(double mu) : mu_(mu) {}
  std::string name() const override { return "ditto"; }

  ClientResult client_update(const Message& payload, const ClientState& state, ClientContext& ctx) const override {
    const ParamVector& w = payload.vec("w");
    ClientResult r;
    r.uplink.vectors.emplace("w", sgd_epochs(ctx, w, ctx.config->lr_local, loss_grad(ctx)));
    ClientContext pc = personal_ctx(ctx);
    const ModelSpec* spec = ctx.spec;
    const double mu = mu_;
    ParamVector beta = sgd_epochs(pc, state.has("beta") ? state.vec("beta") : w, ctx.config->lr_local,
                                  [&](const ParamVector& b, const Batch& batch) {
                                    return gradient(*spec, b, batch).axpy(mu, b - w);
                                  });
    r.state = state;
    r.state.vectors.insert_or_assign("beta", std::move(beta));
    return r;
  }
  EvalModel eval_model(const ClientState& state, ClientContext&) const override {
    return {{state.has("beta") ? state.vec("beta") : *w_}, {}};
  }

 private:
  double mu_;
};

class PFedMe : public GlobalModelStrategy {
 public:
  PFedMe(double mu, double inner_lr, double tol, int max_steps)
      : mu_(mu), inner_lr_(inner_lr), tol_(tol), max_steps_(max_steps) {}
  std::string name() const override { return "pfedme"; }

  ClientResult client_update(const Message& payload, const ClientState& state, ClientContext& ctx) const override {
    const ParamVector& w = payload.vec("w");
    BatchStream stream(ctx.train(), ctx.config->batch_size, ctx.rng);
    const std::size_t steps = stream.batches_per_epoch() * static_cast<std::size_t>(ctx.local_epochs);
    const double eta = ctx.config->lr_local;
    ParamVector local = w;
    std::optional<ParamVector> beta;
    double worst = 0.0;
    int inner = 0;
    for (std::size_t k = 0; k < steps; ++k) {
      const Batch b = stream.next();
      MoreauSolve sol = pfedme_inner_solve(*ctx.spec, local, b, mu_, inner_lr_, tol_, max_steps_, beta);
      worst = std::max(worst, sol.residual);
      inner = std::max(inner, sol.steps);
      local = local.axpy(-eta * mu_, local - sol.beta);
      beta = std::move(sol.beta);
    }
    ClientResult r;
    r.uplink.vectors.emplace("delta", local - w);
    r.state = state;
    r.state.vectors.insert_or_assign("beta", *beta);
    r.diagnostics["pfedme_residual"] = worst;
    r.diagnostics["pfedme_inner_steps"] = inner;
    return r;
  }
  void aggregate(int, std::span<const int> selected, std::span<const Message> uplinks) override {
    w_ = w_->axpy(ctx_.config.lr_server, ctx_.average(selected, collect(uplinks, "delta")));
  }
  EvalModel eval_model(const ClientState& state, ClientContext&) const override {
    return {{state.has("beta") ? state.vec("beta") : *w_}, {}};
  }

 private:
  double mu_;
  double inner_lr_;
  double tol_;
  int max_steps_;
};

// One server coin per round: local gradient steps with probability 1 - p,
// otherwise a mixing step toward the mean of the personal models.
class L2gd : public Strategy {
 public:
  L2gd(double p, double alpha, double mu) : p_(p), alpha_(alpha), mu_(mu) {}
  std::string name() const override { return "l2gd"; }
  bool needs_full_participation() const override { return true; }

  void init_server(const ServerContext& ctx) override {
    ctx_ = ctx;
    init_ = ctx.init_model(0);
  }
  ClientState init_client(int id) const override {
    ClientState s{id, {}, {}};
    s.vectors.emplace("beta", *init_);
    return s;
  }
  std::vector<Message> round_payload(int round, std::span<const int> selected) override {
    RngStream coin = ctx_.rng("l2gd", round);
    mixing_ = coin.uniform() < p_;
    Message m;
    m.meta["mix"] = mixing_ ? 1 : 0;
    return std::vector<Message>(selected.size(), m);
  }
  ClientResult client_update(const Message& payload, const ClientState& state, ClientContext& ctx) const override {
    ClientResult r;
    r.state = state;
    const ParamVector& beta = state.vec("beta");
    if (payload.flag("mix")) {
      r.uplink.vectors.emplace("beta", beta);
    } else {
      const double n = static_cast<double>(ctx_.clients());
      const double step = ctx.config->lr_local / (n * (1.0 - p_));
      r.state.vectors.insert_or_assign("beta", beta.axpy(-step, gradient(*ctx.spec, beta, ctx.train())));
    }
    return r;
  }
  void aggregate(int, std::span<const int>, std::span<const Message> uplinks) override {
    mean_.reset();
    if (!mixing_) return;
    std::vector<ParamVector> betas;
    for (const auto& m : uplinks) betas.push_back(m.vec("beta"));
    const std::vector<double> ones(betas.size(), 1.0);
    mean_ = weighted_average(betas, ones);
  }
  std::vector<std::pair<int, Message>> return_payload(int, std::span<const int> selected) override {
    std::vector<std::pair<int, Message>> out;
    if (!mean_) return out;
    Message m;
    m.vectors.emplace("mean", *mean_);
    for (int id : selected) out.emplace_back(id, m);
    return out;
  }
  ClientState client_receive(const Message& payload, const ClientState& state, ClientContext&) const override {
    ClientState s = state;
    s.vectors.insert_or_assign("beta",
                               l2gd_mix(state.vec("beta"), payload.vec("mean"), alpha_, mu_, ctx_.clients(), p_));
    return s;
  }
  EvalModel eval_model(const ClientState& state, ClientContext&) const override { return {{state.vec("beta")}, {}}; }
  json server_diagnostics() const override { return {{"l2gd_mix", mixing_ ? 1 : 0}}; }

 private:
  double p_;
  double alpha_;
  double mu_;
  ServerContext ctx_;
  std::optional<ParamVector> init_;
  bool mixing_ = false;
  std::optional<ParamVector> mean_;
};

// Shares one side of a layer boundary: the base (layers up to and including
// the boundary) for fedper, the top for lgfedavg. The other side stays on
// the client.
class PartialSharing : public Strategy {
 public:
  PartialSharing(std::string name, std::string boundary, bool share_base)
      : name_(std::move(name)), boundary_(std::move(boundary)), share_base_(share_base) {}
  std::string name() const override { return name_; }

  void init_server(const ServerContext& ctx) override {
    ctx_ = ctx;
    init_ = ctx.init_model(0);
    if (!boundary_.empty() && !init_->layout()->entries().empty()) {
      try {
        init_->layout()->index_of(boundary_);
      } catch (const StructuralError&) {
        throw ConfigError("strategy.params.boundary", "unknown layer '" + boundary_ + "'");
      }
    }
    const std::vector<double> part = shared_part(*init_);
    flat_ = LayerLayout::flat(part.size(), "shared");
    shared_ = ParamVector(flat_, part);
  }
  std::vector<Message> round_payload(int, std::span<const int> selected) override {
    Message m;
    m.vectors.emplace("shared", *shared_);
    return std::vector<Message>(selected.size(), m);
  }
  ClientResult client_update(const Message& payload, const ClientState& state, ClientContext& ctx) const override {
    const ParamVector start = assemble(state, payload.vec("shared"));
    ParamVector trained = sgd_epochs(ctx, start, ctx.config->lr_local, loss_grad(ctx));
    ClientResult r;
    r.uplink.vectors.emplace("shared", ParamVector(flat_, shared_part(trained)));
    r.state = state;
    r.state.vectors.insert_or_assign("local", std::move(trained));
    return r;
  }
  void aggregate(int, std::span<const int> selected, std::span<const Message> uplinks) override {
    std::vector<ParamVector> parts;
    for (const auto& m : uplinks) parts.push_back(m.vec("shared"));
    shared_ = shared_->axpy(ctx_.config.lr_server, ctx_.average(selected, parts) - *shared_);
  }
  EvalModel eval_model(const ClientState& state, ClientContext&) const override {
    return {{assemble(state, *shared_)}, {}};
  }
  json server_state() const override { return {{"shared", shared_->to_vector()}, {"boundary", boundary_}}; }

 private:
  std::vector<double> shared_part(const ParamVector& v) const {
    const ParamSplit s = split_params(v, boundary_);
    return share_base_ ? s.base : s.top;
  }
  ParamVector assemble(const ClientState& state, const ParamVector& shared) const {
    ParamSplit s = split_params(state.has("local") ? state.vec("local") : *init_, boundary_);
    const auto vals = shared.values();
    (share_base_ ? s.base : s.top).assign(vals.begin(), vals.end());
    return merge_params(s);
  }

  std::string name_;
  std::string boundary_;
  bool share_base_;
  ServerContext ctx_;
  std::optional<ParamVector> init_;
  LayoutPtr flat_;
  std::optional<ParamVector> shared_;
};

class Apfl : public LocalSgdStrategy {
 public:
  explicit Apfl(double zeta) : zeta_(zeta) {}
  std::string name() const override { return "apfl"; }

  ClientResult client_update(const Message& payload, const ClientState& state, ClientContext& ctx) const override {
    const ParamVector& w = payload.vec("w");
    ClientResult r;
    r.uplink.vectors.emplace("w", sgd_epochs(ctx, w, ctx.config->lr_local, loss_grad(ctx)));
    ClientContext pc = personal_ctx(ctx);
    const ModelSpec* spec = ctx.spec;
    const double zeta = zeta_;
    ParamVector beta = sgd_epochs(pc, state.has("beta") ? state.vec("beta") : w, ctx.config->lr_local,
                                  [&](const ParamVector& b, const Batch& batch) {
                                    return apfl_local_gradient(*spec, b, w, zeta, batch);
                                  });
    r.state = state;
    r.state.vectors.insert_or_assign("beta", std::move(beta));
    return r;
  }
  EvalModel eval_model(const ClientState& state, ClientContext&) const override {
    if (!state.has("beta")) return {{*w_}, {}};
    return {{zeta_ * state.vec("beta") + (1.0 - zeta_) * *w_}, {}};
  }

 private:
  double zeta_;
};

class PerFedAvg : public LocalSgdStrategy {
 public:
  PerFedAvg(double alpha, MetaOrder order, int inner_steps, bool warmup, double switch_fraction, int adapt_steps)
      : alpha_(alpha),
        order_(order),
        inner_steps_(inner_steps),
        warmup_(warmup),
        switch_fraction_(switch_fraction),
        adapt_steps_(adapt_steps) {}
  std::string name() const override { return "perfedavg"; }

  EvalModel eval_model(const ClientState&, ClientContext& ctx) const override {
    ParamVector w = *w_;
    for (int s = 0; s < adapt_steps_; ++s) w = w.axpy(-alpha_, gradient(*ctx.spec, w, ctx.train()));
    return {{std::move(w)}, {}};
  }

 protected:
  GradFn local_gradient(const Message&, const ClientState&, const ClientContext& ctx) const override {
    const double switch_round = std::floor(switch_fraction_ * ctx.config->rounds);
    if (warmup_ && ctx.round <= switch_round) return loss_grad(ctx);
    const ModelSpec* spec = ctx.spec;
    return [spec, this](const ParamVector& w, const Batch& b) {
      return perfedavg_meta_gradient(*spec, w, b, alpha_, order_, inner_steps_);
    };
  }

 private:
  double alpha_;
  MetaOrder order_;
  int inner_steps_;
  bool warmup_;
  double switch_fraction_;
  int adapt_steps_;
};

// Learns w and a coordinate-wise inner step eta jointly.
class MetaSgd : public GlobalModelStrategy {
 public:
  MetaSgd(std::optional<double> meta_lr, double val_fraction, bool freeze_eta, std::optional<double> eta_init)
      : meta_lr_(meta_lr), val_fraction_(val_fraction), freeze_(freeze_eta), eta_init_(eta_init) {}
  std::string name() const override { return "metasgd"; }

  void init_server(const ServerContext& ctx) override {
    GlobalModelStrategy::init_server(ctx);
    eta_ = ParamVector::filled(w_->layout(), eta_init_.value_or(ctx.config.lr_local));
  }
  std::vector<Message> round_payload(int, std::span<const int> selected) override {
    Message m;
    m.vectors.emplace("w", *w_);
    m.vectors.emplace("eta", *eta_);
    return std::vector<Message>(selected.size(), m);
  }
  ClientResult client_update(const Message& payload, const ClientState& state, ClientContext& ctx) const override {
    const auto [train, val] = split(ctx);
    const double lr = meta_lr_.value_or(ctx.config->lr_local);
    ParamVector w = payload.vec("w");
    ParamVector eta = payload.vec("eta");
    for (int s = 0; s < ctx.local_epochs; ++s) {
      JointGradient g = metasgd_joint_gradient(*ctx.spec, w, eta, train, val);
      w = w.axpy(-lr, g.dw);
      if (!freeze_) eta = eta.axpy(-lr, g.deta);
    }
    ClientResult r;
    r.uplink.vectors.emplace("dw", w - payload.vec("w"));
    r.uplink.vectors.emplace("deta", eta - payload.vec("eta"));
    r.state = state;
    return r;
  }
  void aggregate(int, std::span<const int> selected, std::span<const Message> uplinks) override {
    const double g = ctx_.config.lr_server;
    w_ = w_->axpy(g, ctx_.average(selected, collect(uplinks, "dw")));
    eta_ = eta_->axpy(g, ctx_.average(selected, collect(uplinks, "deta")));
  }
  EvalModel eval_model(const ClientState&, ClientContext& ctx) const override {
    return {{*w_ - eta_->hadamard(gradient(*ctx.spec, *w_, ctx.train()))}, {}};
  }
  json server_state() const override {
    json j = GlobalModelStrategy::server_state();
    j["eta"] = eta_->to_vector();
    return j;
  }

 private:
  // Fixed per-client split: same rows every round.
  std::pair<Batch, Batch> split(const ClientContext& ctx) const {
    const Batch& all = ctx.train();
    const auto n_val = static_cast<std::size_t>(std::floor(val_fraction_ * static_cast<double>(all.size())));
    if (n_val == 0 || n_val >= all.size()) return {all, all};
    std::vector<std::size_t> order(all.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    RngStream rng = rng_substream(ctx.config->seed, "metasgd_split", 0, ctx.client_id);
    rng.shuffle(order);
    const std::span<const std::size_t> rows(order);
    return {all.subset(rows.subspan(n_val)), all.subset(rows.first(n_val))};
  }

  std::optional<double> meta_lr_;
  double val_fraction_;
  bool freeze_;
  std::optional<double> eta_init_;
  std::optional<ParamVector> eta_;
};

}  // namespace

std::unique_ptr<Strategy> make_ttp(const HyperParams& p) {
  const int steps = p.integer("steps");
  if (steps < 0) p.fail("steps", "must be >= 0");
  const auto lr = p.optional_real("lr");
  if (lr && !(*lr > 0.0)) p.fail("lr", "must be > 0");
  return std::make_unique<Ttp>(parse_ttp_variant(p.text("variant")), steps, p.nonnegative("mu"), lr);
}
std::unique_ptr<Strategy> make_local(const HyperParams&) { return std::make_unique<LocalOnly>(); }
std::unique_ptr<Strategy> make_ditto(const HyperParams& p) { return std::make_unique<Ditto>(p.nonnegative("mu")); }
std::unique_ptr<Strategy> make_pfedme(const HyperParams& p) {
  const int max_steps = p.integer("inner_max_steps");
  if (max_steps < 1) p.fail("inner_max_steps", "must be >= 1");
  return std::make_unique<PFedMe>(p.positive("mu"), p.positive("inner_lr"), p.positive("tol"), max_steps);
}
std::unique_ptr<Strategy> make_l2gd(const HyperParams& p) {
  const double prob = p.real("p");
  if (!(prob > 0.0 && prob < 1.0)) p.fail("p", "must be strictly between 0 and 1");
  return std::make_unique<L2gd>(prob, p.nonnegative("alpha"), p.nonnegative("mu"));
}
std::unique_ptr<Strategy> make_fedper(const HyperParams& p) {
  return std::make_unique<PartialSharing>("fedper", p.text("boundary"), true);
}
std::unique_ptr<Strategy> make_lgfedavg(const HyperParams& p) {
  return std::make_unique<PartialSharing>("lgfedavg", p.text("boundary"), false);
}
std::unique_ptr<Strategy> make_apfl(const HyperParams& p) {
  return std::make_unique<Apfl>(p.real_in("zeta", 0.0, 1.0));
}
std::unique_ptr<Strategy> make_perfedavg(const HyperParams& p) {
  const std::string schedule = p.text("schedule");
  if (schedule != "meta_only" && schedule != "fedavg_then_meta") {
    p.fail("schedule", "expected meta_only|fedavg_then_meta");
  }
  const int inner = p.integer("inner_steps");
  if (inner < 1) p.fail("inner_steps", "must be >= 1");
  const int adapt = p.integer("adapt_steps");
  if (adapt < 0) p.fail("adapt_steps", "must be >= 0");
  return std::make_unique<PerFedAvg>(p.nonnegative("alpha"), parse_meta_order(p.text("order")), inner,
                                     schedule == "fedavg_then_meta", p.real_in("switch_fraction", 0.0, 1.0), adapt);
}
std::unique_ptr<Strategy> make_metasgd(const HyperParams& p) {
  const auto meta_lr = p.optional_real("meta_lr");
  if (meta_lr && !(*meta_lr > 0.0)) p.fail("meta_lr", "must be > 0");
  const double vf = p.real("val_fraction");
  if (vf < 0.0 || vf >= 1.0) p.fail("val_fraction", "must be in [0, 1)");
  return std::make_unique<MetaSgd>(meta_lr, vf, p.boolean("freeze_eta"), p.optional_real("eta_init"));
}

}  // namespace detail
}  // namespace fedsim
