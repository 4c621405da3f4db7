#include "fedsim/engine.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <numeric>

#include "fedsim/errors.hpp"

namespace fedsim {

std::string to_string(SamplingScheme s) {
  switch (s) {
    case SamplingScheme::Uniform: return "uniform";
    case SamplingScheme::Size: return "size";
    case SamplingScheme::GradNorm: return "grad_norm";
    case SamplingScheme::Loss: return "loss";
  }
  return "?";
}

std::string to_string(Weighting w) {
  switch (w) {
    case Weighting::Auto: return "auto";
    case Weighting::Size: return "size";
    case Weighting::Equal: return "equal";
  }
  return "?";
}

SamplingScheme parse_sampling(const std::string& s) {
  if (s == "uniform") return SamplingScheme::Uniform;
  if (s == "size") return SamplingScheme::Size;
  if (s == "grad_norm") return SamplingScheme::GradNorm;
  if (s == "loss") return SamplingScheme::Loss;
  throw ConfigError("engine.sampling", "unknown scheme '" + s + "' (uniform|size|grad_norm|loss)");
}

Weighting parse_weighting(const std::string& s) {
  if (s == "auto") return Weighting::Auto;
  if (s == "size") return Weighting::Size;
  if (s == "equal") return Weighting::Equal;
  throw ConfigError("engine.weighting", "unknown weighting '" + s + "' (auto|size|equal)");
}

void EngineConfig::validate() const {
  if (rounds < 1) throw ConfigError("engine.rounds", "must be >= 1");
  if (local_epochs < 1) throw ConfigError("engine.local_epochs", "must be >= 1");
  for (std::size_t i = 0; i < client_epochs.size(); ++i) {
    if (client_epochs[i] < 1) throw ConfigError("engine.client_epochs[" + std::to_string(i) + "]", "must be >= 1");
  }
  if (batch_size && *batch_size < 1) throw ConfigError("engine.batch_size", "must be >= 1 or \"full\"");
  if (!(lr_local > 0.0) || !std::isfinite(lr_local)) throw ConfigError("engine.lr_local", "must be > 0");
  if (!(lr_server >= 0.0) || !std::isfinite(lr_server)) throw ConfigError("engine.lr_server", "must be >= 0");
  if (!(sample_fraction > 0.0 && sample_fraction <= 1.0)) {
    throw ConfigError("engine.sample_fraction", "must be in (0, 1]");
  }
  if (!std::isfinite(sampling_gamma)) throw ConfigError("engine.sampling_gamma", "must be finite");
  if (workers < 1) throw ConfigError("engine.workers", "must be >= 1");
}

int EngineConfig::epochs_for(int client_id) const {
  if (client_epochs.empty()) return local_epochs;
  return client_epochs.at(static_cast<std::size_t>(client_id));
}

std::size_t Message::float_count() const {
  std::size_t n = scalars.size();
  for (const auto& [k, v] : vectors) n += v.dim();
  return n;
}

const ParamVector& Message::vec(const std::string& key) const {
  auto it = vectors.find(key);
  if (it == vectors.end()) throw StructuralError("message has no vector '" + key + "'");
  return it->second;
}

double Message::scalar(const std::string& key) const {
  auto it = scalars.find(key);
  if (it == scalars.end()) throw StructuralError("message has no scalar '" + key + "'");
  return it->second;
}

int Message::flag(const std::string& key) const {
  auto it = meta.find(key);
  if (it == meta.end()) throw StructuralError("message has no field '" + key + "'");
  return it->second;
}

const ParamVector& ClientState::vec(const std::string& key) const {
  auto it = vectors.find(key);
  if (it == vectors.end()) throw StructuralError("client state has no vector '" + key + "'");
  return it->second;
}

RngStream ServerContext::rng(std::string_view tag, std::int64_t round) const {
  return rng_substream(config.seed, std::string("server:") + std::string(tag), round, 0);
}

ParamVector ServerContext::init_model(std::int64_t index) const {
  RngStream r = rng_substream(config.seed, "init", 0, index);
  return init_params(spec, r);
}

ParamVector ServerContext::average(std::span<const int> ids, std::span<const ParamVector> vectors) const {
  std::vector<double> w;
  w.reserve(ids.size());
  for (int id : ids) w.push_back(client_weights.at(static_cast<std::size_t>(id)));
  return weighted_average(vectors, w);
}

double population_variance(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double s = 0.0;
  for (double x : xs) s += (x - mean) * (x - mean);
  return s / static_cast<double>(xs.size());
}

std::vector<double> adaptive_sampling_probs(std::span<const double> stats, double gamma) {
  if (stats.empty()) return {};
  double top = -std::numeric_limits<double>::infinity();
  for (double s : stats) top = std::max(top, gamma * s);
  std::vector<double> p(stats.size());
  double z = 0.0;
  for (std::size_t i = 0; i < stats.size(); ++i) z += (p[i] = std::exp(gamma * stats[i] - top));
  for (double& v : p) v /= z;
  return p;
}

std::vector<double> sampling_probs(SamplingScheme scheme, std::span<const double> sizes,
                                   std::span<const double> stats, double gamma) {
  const std::size_t n = sizes.size();
  if (n == 0) throw DomainError("no clients to sample from");
  std::vector<double> uniform(n, 1.0 / static_cast<double>(n));
  switch (scheme) {
    case SamplingScheme::Uniform: return uniform;
    case SamplingScheme::Size: {
      const double total = std::accumulate(sizes.begin(), sizes.end(), 0.0);
      if (!(total > 0.0)) throw DomainError("client sizes sum to zero");
      std::vector<double> p(n);
      for (std::size_t i = 0; i < n; ++i) p[i] = sizes[i] / total;
      return p;
    }
    case SamplingScheme::GradNorm:
    case SamplingScheme::Loss:
      if (stats.size() != n) return uniform;  // no history yet
      return adaptive_sampling_probs(stats, gamma);
  }
  return uniform;
}

std::vector<int> select_clients(SamplingScheme scheme, std::span<const double> sizes, std::span<const double> stats,
                                double fraction, double gamma, RngStream& rng) {
  const std::size_t n = sizes.size();
  if (!(fraction > 0.0 && fraction <= 1.0)) throw DomainError("sample fraction must be in (0, 1]");
  const auto m = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-9));
  if (m < 1) throw DomainError("sample fraction selects no clients");
  std::vector<int> chosen;
  if (m >= n) {
    chosen.resize(n);
    std::iota(chosen.begin(), chosen.end(), 0);
    return chosen;
  }
  std::vector<double> p = sampling_probs(scheme, sizes, stats, gamma);
  std::vector<int> pool(n);
  std::iota(pool.begin(), pool.end(), 0);
  for (std::size_t k = 0; k < m; ++k) {
    double total = 0.0;
    for (int id : pool) total += p[static_cast<std::size_t>(id)];
    std::size_t pick = pool.size() - 1;
    if (total > 0.0) {
      const double u = rng.uniform() * total;
      double acc = 0.0;
      for (std::size_t j = 0; j < pool.size(); ++j) {
        acc += p[static_cast<std::size_t>(pool[j])];
        if (u < acc) {
          pick = j;
          break;
        }
      }
    } else {
      pick = static_cast<std::size_t>(rng.index(pool.size()));
    }
    chosen.push_back(pool[pick]);
    pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(pick));
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

std::vector<double> aggregation_weights(const EngineConfig& config, std::span<const double> sizes) {
  Weighting w = config.weighting;
  if (w == Weighting::Auto) w = config.sampling == SamplingScheme::Uniform ? Weighting::Size : Weighting::Equal;
  if (w == Weighting::Equal) return std::vector<double>(sizes.size(), 1.0);
  return {sizes.begin(), sizes.end()};
}

BatchStream::BatchStream(const Batch& data, std::optional<int> batch_size, RngStream& rng)
    : data_(data), batch_size_(batch_size), rng_(rng) {
  if (data_.empty()) throw DomainError("cannot train on an empty dataset");
  if (batch_size_ && static_cast<std::size_t>(*batch_size_) >= data_.size()) batch_size_.reset();
  per_epoch_ = batch_size_ ? (data_.size() + static_cast<std::size_t>(*batch_size_) - 1) / static_cast<std::size_t>(*batch_size_) : 1;
}

Batch BatchStream::next() {
  if (!batch_size_) return data_;
  const auto b = static_cast<std::size_t>(*batch_size_);
  if (cursor_ == 0) {
    order_.resize(data_.size());
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    rng_.shuffle(order_);
  }
  const std::size_t end = std::min(cursor_ + b, order_.size());
  Batch out = data_.subset(std::span(order_).subspan(cursor_, end - cursor_));
  cursor_ = end >= order_.size() ? 0 : end;
  return out;
}

ParamVector sgd_steps(BatchStream& stream, ParamVector w, std::size_t steps, double lr, const GradFn& grad) {
  for (std::size_t s = 0; s < steps; ++s) {
    const Batch b = stream.next();
    w = w.axpy(-lr, grad(w, b));
  }
  return w;
}

ParamVector sgd_epochs(ClientContext& ctx, ParamVector w, double lr, const GradFn& grad) {
  BatchStream stream(ctx.train(), ctx.config->batch_size, ctx.rng);
  const std::size_t steps = stream.batches_per_epoch() * static_cast<std::size_t>(ctx.local_epochs);
  return sgd_steps(stream, std::move(w), steps, lr, grad);
}

GradFn loss_grad(const ClientContext& ctx) {
  const ModelSpec* spec = ctx.spec;
  return [spec](const ParamVector& w, const Batch& b) { return gradient(*spec, w, b); };
}

json RoundRecord::to_json() const {
  json j;
  j["round"] = round;
  j["selected"] = selected;
  j["train_loss"] = train_loss;
  j["test_loss"] = test_loss;
  if (!train_accuracy.empty()) j["train_accuracy"] = train_accuracy;
  if (!test_accuracy.empty()) j["test_accuracy"] = test_accuracy;
  j["variance_metric"] = variance_metric;
  j["loss_variance"] = loss_variance;
  j["mean_train_loss"] = mean_train_loss;
  j["mean_test_loss"] = mean_test_loss;
  j["floats_uplink"] = floats_uplink;
  j["floats_downlink"] = floats_downlink;
  j["diagnostics"] = diagnostics;
  if (wall_ms) j["wall_ms"] = *wall_ms;
  return j;
}

// ---------------------------------------------------------------------------
// worker pool

struct WorkerPool::Shared {
  std::mutex mu;
  std::condition_variable wake;
  std::condition_variable done;
  const std::function<void(std::size_t)>* job = nullptr;
  std::size_t n = 0;
  std::atomic<std::size_t> next{0};
  std::size_t busy = 0;
  std::uint64_t generation = 0;
  bool stop = false;
  std::vector<std::exception_ptr> errors;

  void drain() {
    for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
      try {
        (*job)(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  }
};

WorkerPool::WorkerPool(int workers) : shared_(std::make_unique<Shared>()) {
  for (int t = 1; t < std::max(1, workers); ++t) {
    threads_.emplace_back([s = shared_.get()] {
      std::uint64_t seen = 0;
      for (;;) {
        {
          std::unique_lock lock(s->mu);
          s->wake.wait(lock, [&] { return s->stop || s->generation != seen; });
          if (s->stop) return;
          seen = s->generation;
          ++s->busy;
        }
        s->drain();
        {
          std::lock_guard lock(s->mu);
          if (--s->busy == 0) s->done.notify_all();
        }
      }
    });
  }
}

WorkerPool::~WorkerPool() {
  {
    std::lock_guard lock(shared_->mu);
    shared_->stop = true;
  }
  shared_->wake.notify_all();
  for (auto& t : threads_) t.join();
}

void WorkerPool::parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  Shared& s = *shared_;
  {
    std::lock_guard lock(s.mu);
    s.job = &fn;
    s.n = n;
    s.next.store(0);
    s.errors.assign(n, nullptr);
    ++s.generation;
  }
  if (!threads_.empty()) s.wake.notify_all();
  s.drain();
  {
    std::unique_lock lock(s.mu);
    s.done.wait(lock, [&] { return s.busy == 0; });
    s.job = nullptr;
  }
  for (auto& e : s.errors) {
    if (e) std::rethrow_exception(e);
  }
}

int default_workers(std::optional<int> requested) {
  if (requested) return *requested;
  if (const char* env = std::getenv("FEDSIM_WORKERS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1) return static_cast<int>(v);
    throw ConfigError("FEDSIM_WORKERS", "must be a positive integer");
  }
  return 1;
}

// ---------------------------------------------------------------------------
// round loop

namespace {

struct ClientEval {
  double train_loss = 0.0;
  double test_loss = 0.0;
  double train_acc = 0.0;
  double test_acc = 0.0;
  double grad_sq = 0.0;
};

std::vector<double> mixture_outputs(const ModelSpec& spec, const EvalModel& m, const Batch& b) {
  if (m.members.empty()) throw StructuralError("evaluation model has no members");
  if (!m.weights.empty() && m.weights.size() != m.members.size()) {
    throw StructuralError("evaluation weights do not match members");
  }
  std::vector<double> out;
  double total = 0.0;
  for (std::size_t k = 0; k < m.members.size(); ++k) {
    const double wk = m.weights.empty() ? 1.0 : m.weights[k];
    const auto o = predict(spec, m.members[k], b);
    if (out.empty()) out.assign(o.size(), 0.0);
    for (std::size_t i = 0; i < o.size(); ++i) out[i] += wk * o[i];
    total += wk;
  }
  if (!(total > 0.0)) throw DomainError("evaluation weights sum to zero");
  for (double& v : out) v /= total;
  return out;
}

double mean_of(std::span<const double> xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return xs.empty() ? 0.0 : s / static_cast<double>(xs.size());
}

}  // namespace

RunResult run_federation(const EngineConfig& config, const FederatedDataset& data, Strategy& strategy) {
  config.validate();
  data.validate();
  const std::size_t n_clients = data.size();
  if (!config.client_epochs.empty() && config.client_epochs.size() != n_clients) {
    throw ConfigError("engine.client_epochs", "needs one entry per client");
  }
  if (strategy.needs_full_participation() && config.sample_fraction < 1.0) {
    throw ConfigError("engine.sample_fraction", strategy.name() + " requires full participation");
  }

  ServerContext sctx;
  sctx.data = &data;
  sctx.spec = data.spec;
  sctx.config = config;
  const std::vector<double> sizes = data.sizes();
  sctx.client_weights = aggregation_weights(config, sizes);

  WorkerPool pool(config.workers);
  RunResult result;
  int round = 0;

  auto make_ctx = [&](int client, std::string_view tag) {
    ClientContext c;
    c.round = round;
    c.client_id = client;
    c.data = &data.clients[static_cast<std::size_t>(client)];
    c.spec = &sctx.spec;
    c.config = &config;
    c.local_epochs = config.epochs_for(client);
    c.rng = rng_substream(config.seed, tag, round, client);
    return c;
  };

  std::vector<ClientState> states;
  std::vector<double> stats;
  try {
    strategy.init_server(sctx);
    for (std::size_t i = 0; i < n_clients; ++i) states.push_back(strategy.init_client(static_cast<int>(i)));

    for (round = 1; round <= config.rounds; ++round) {
      const auto t0 = std::chrono::steady_clock::now();
      RoundRecord rec;
      rec.round = round;

      if (strategy.uses_probe(round)) {
        const Message probe = strategy.probe_payload(round);
        std::vector<Message> replies(n_clients);
        pool.parallel_for(n_clients, [&](std::size_t i) {
          ClientContext c = make_ctx(static_cast<int>(i), "probe");
          replies[i] = strategy.client_probe(probe, states[i], c);
        });
        rec.floats_downlink += probe.float_count() * n_clients;
        for (const auto& r : replies) rec.floats_uplink += r.float_count();
        strategy.absorb_probe(round, replies);
      }

      RngStream sample_rng = rng_substream(config.seed, "sampling", round, 0);
      rec.selected = select_clients(config.sampling, sizes, stats, config.sample_fraction, config.sampling_gamma,
                                    sample_rng);
      const std::vector<Message> payloads = strategy.round_payload(round, rec.selected);
      if (payloads.size() != rec.selected.size()) throw StructuralError("strategy returned wrong payload count");
      for (const auto& p : payloads) rec.floats_downlink += p.float_count();

      std::vector<std::optional<ClientResult>> results(rec.selected.size());
      pool.parallel_for(rec.selected.size(), [&](std::size_t k) {
        const int id = rec.selected[k];
        ClientContext c = make_ctx(id, "client");
        results[k] = strategy.client_update(payloads[k], states[static_cast<std::size_t>(id)], c);
      });

      std::vector<Message> uplinks;
      uplinks.reserve(results.size());
      std::map<std::string, std::vector<double>> client_diag;
      for (std::size_t k = 0; k < results.size(); ++k) {
        ClientResult& r = *results[k];
        rec.floats_uplink += r.uplink.float_count();
        r.state.client_id = rec.selected[k];
        states[static_cast<std::size_t>(rec.selected[k])] = std::move(r.state);
        for (const auto& [key, v] : r.diagnostics) {
          auto& col = client_diag[key];
          col.resize(results.size(), std::numeric_limits<double>::quiet_NaN());
          col[k] = v;
        }
        uplinks.push_back(std::move(r.uplink));
      }
      strategy.aggregate(round, rec.selected, uplinks);

      const auto returns = strategy.return_payload(round, rec.selected);
      if (!returns.empty()) {
        for (const auto& [id, msg] : returns) rec.floats_downlink += msg.float_count();
        std::vector<ClientState> updated(returns.size());
        pool.parallel_for(returns.size(), [&](std::size_t k) {
          const int id = returns[k].first;
          ClientContext c = make_ctx(id, "receive");
          updated[k] = strategy.client_receive(returns[k].second, states[static_cast<std::size_t>(id)], c);
        });
        for (std::size_t k = 0; k < returns.size(); ++k) {
          states[static_cast<std::size_t>(returns[k].first)] = std::move(updated[k]);
        }
      }

      std::vector<ClientEval> evals(n_clients);
      const bool need_grad = config.sampling == SamplingScheme::GradNorm;
      pool.parallel_for(n_clients, [&](std::size_t i) {
        ClientContext c = make_ctx(static_cast<int>(i), "eval");
        const EvalModel m = strategy.eval_model(states[i], c);
        const ClientDataset& d = data.clients[i];
        ClientEval& e = evals[i];
        const auto tr = mixture_outputs(sctx.spec, m, d.train);
        e.train_loss = loss_from_outputs(sctx.spec, tr, d.train);
        if (sctx.spec.classification()) e.train_acc = accuracy_from_outputs(sctx.spec, tr, d.train);
        if (!d.test.empty()) {
          const auto te = mixture_outputs(sctx.spec, m, d.test);
          e.test_loss = loss_from_outputs(sctx.spec, te, d.test);
          if (sctx.spec.classification()) e.test_acc = accuracy_from_outputs(sctx.spec, te, d.test);
        }
        if (need_grad) e.grad_sq = gradient(sctx.spec, m.members.front(), d.train).squared_norm();
      });

      bool all_test = true;
      for (const auto& c : data.clients) all_test = all_test && !c.test.empty();
      for (std::size_t i = 0; i < n_clients; ++i) {
        rec.train_loss.push_back(evals[i].train_loss);
        if (all_test) rec.test_loss.push_back(evals[i].test_loss);
        if (sctx.spec.classification()) {
          rec.train_accuracy.push_back(evals[i].train_acc);
          if (all_test) rec.test_accuracy.push_back(evals[i].test_acc);
        }
      }
      rec.variance_metric = all_test ? "test_loss" : "train_loss";
      rec.loss_variance = population_variance(all_test ? rec.test_loss : rec.train_loss);
      rec.mean_train_loss = mean_of(rec.train_loss);
      rec.mean_test_loss = all_test ? mean_of(rec.test_loss) : rec.mean_train_loss;
      if (!std::isfinite(rec.mean_train_loss) || !std::isfinite(rec.mean_test_loss) ||
          !std::isfinite(rec.loss_variance)) {
        throw DivergenceError(round, "non-finite client loss");
      }

      stats.assign(n_clients, 0.0);
      for (std::size_t i = 0; i < n_clients; ++i) stats[i] = need_grad ? evals[i].grad_sq : evals[i].train_loss;

      json diag = strategy.server_diagnostics();
      for (auto& [key, col] : client_diag) {
        json arr = json::array();
        for (double v : col) arr.push_back(std::isfinite(v) ? json(v) : json(nullptr));
        diag[key] = std::move(arr);
      }
      rec.diagnostics = std::move(diag);
      if (config.timing) {
        rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      }
      const double mean_test = rec.mean_test_loss;
      result.records.push_back(std::move(rec));
      if (config.target_loss && mean_test <= *config.target_loss) break;
    }
  } catch (const NonFiniteError& e) {
    throw DivergenceError(std::max(round, 1), e.what());
  }
  result.client_states = std::move(states);
  result.server_state = strategy.server_state();
  return result;
}

}  // namespace fedsim
