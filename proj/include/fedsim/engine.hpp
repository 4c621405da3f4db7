#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "fedsim/datagen.hpp"
#include "fedsim/model.hpp"
#include "fedsim/param.hpp"
#include "fedsim/rng.hpp"

namespace fedsim {

using json = nlohmann::json;

enum class SamplingScheme { Uniform, Size, GradNorm, Loss };
enum class Weighting { Auto, Size, Equal };

std::string to_string(SamplingScheme s);
std::string to_string(Weighting w);
SamplingScheme parse_sampling(const std::string& s);
Weighting parse_weighting(const std::string& s);

struct EngineConfig {
  int rounds = 1;
  int local_epochs = 1;
  std::vector<int> client_epochs;  // per-client override; empty = local_epochs everywhere
  std::optional<int> batch_size;   // nullopt = full batch
  double lr_local = 0.1;
  double lr_server = 1.0;
  double sample_fraction = 1.0;
  SamplingScheme sampling = SamplingScheme::Uniform;
  double sampling_gamma = 1.0;
  Weighting weighting = Weighting::Auto;
  int workers = 1;
  std::optional<double> target_loss;  // stop once mean test loss reaches it
  bool timing = false;                // record wall_ms
  std::uint64_t seed = 0;

  void validate() const;  // throws ConfigError with an engine.* path
  int epochs_for(int client_id) const;
};

/// A payload in either direction. `vectors` and `scalars` are counted as
/// transmitted floats; `meta` carries control indices and flags and is not.
struct Message {
  std::map<std::string, ParamVector> vectors;
  std::map<std::string, double> scalars;
  std::map<std::string, int> meta;

  std::size_t float_count() const;
  const ParamVector& vec(const std::string& key) const;
  double scalar(const std::string& key) const;
  int flag(const std::string& key) const;
};

struct ClientState {
  int client_id = 0;
  std::map<std::string, ParamVector> vectors;
  std::map<std::string, double> scalars;

  bool has(const std::string& key) const { return vectors.count(key) != 0; }
  const ParamVector& vec(const std::string& key) const;
};

struct ClientContext {
  int round = 0;
  int client_id = 0;
  const ClientDataset* data = nullptr;
  const ModelSpec* spec = nullptr;
  const EngineConfig* config = nullptr;
  int local_epochs = 1;
  RngStream rng{0};

  const Batch& train() const { return data->train; }
};

struct ClientResult {
  Message uplink;
  ClientState state;
  std::map<std::string, double> diagnostics;  // recorded, never counted as traffic
};

/// What a client is evaluated with: a weighted mixture of member models.
/// Member outputs (probabilities for classifiers) are averaged.
struct EvalModel {
  std::vector<ParamVector> members;
  std::vector<double> weights;  // empty = uniform
};

struct ServerContext {
  const FederatedDataset* data = nullptr;
  ModelSpec spec;
  EngineConfig config;
  std::vector<double> client_weights;  // aggregation weight per client id

  std::size_t clients() const { return data->size(); }
  RngStream rng(std::string_view tag, std::int64_t round = 0) const;
  ParamVector init_model(std::int64_t index = 0) const;
  /// Weighted mean of vectors reported by `ids` (ascending) under client_weights.
  ParamVector average(std::span<const int> ids, std::span<const ParamVector> vectors) const;
};

/// Server/client protocol. Client hooks are const and run concurrently;
/// server hooks run single-threaded between them.
class Strategy {
 public:
  virtual ~Strategy() = default;

  virtual std::string name() const = 0;
  virtual void init_server(const ServerContext& ctx) = 0;
  virtual ClientState init_client(int client_id) const { return ClientState{client_id, {}, {}}; }
  virtual bool needs_full_participation() const { return false; }

  // Optional phase before each round where every client answers a broadcast.
  virtual bool uses_probe(int /*round*/) const { return false; }
  virtual Message probe_payload(int /*round*/) const { return {}; }
  virtual Message client_probe(const Message& /*payload*/, const ClientState& /*state*/,
                               ClientContext& /*ctx*/) const {
    return {};
  }
  virtual void absorb_probe(int /*round*/, std::span<const Message> /*replies*/) {}

  /// One payload per selected client, in the order of `selected`.
  virtual std::vector<Message> round_payload(int round, std::span<const int> selected) = 0;
  virtual ClientResult client_update(const Message& payload, const ClientState& state, ClientContext& ctx) const = 0;
  virtual void aggregate(int round, std::span<const int> selected, std::span<const Message> uplinks) = 0;

  // Optional broadcast after aggregation (e.g. mixing steps).
  virtual std::vector<std::pair<int, Message>> return_payload(int /*round*/, std::span<const int> /*selected*/) {
    return {};
  }
  virtual ClientState client_receive(const Message& /*payload*/, const ClientState& state,
                                     ClientContext& /*ctx*/) const {
    return state;
  }

  virtual EvalModel eval_model(const ClientState& state, ClientContext& ctx) const = 0;
  virtual json server_state() const { return json::object(); }
  virtual json server_diagnostics() const { return json::object(); }
};

struct RoundRecord {
  int round = 0;
  std::vector<int> selected;
  std::vector<double> train_loss;  // per client, indexed by id
  std::vector<double> test_loss;
  std::vector<double> train_accuracy;  // classification only
  std::vector<double> test_accuracy;
  std::string variance_metric;  // "test_loss" or "train_loss"
  double loss_variance = 0.0;
  double mean_train_loss = 0.0;
  double mean_test_loss = 0.0;
  std::size_t floats_uplink = 0;
  std::size_t floats_downlink = 0;
  json diagnostics = json::object();
  std::optional<double> wall_ms;

  json to_json() const;
};

struct RunResult {
  std::vector<RoundRecord> records;
  std::vector<ClientState> client_states;
  json server_state;
};

/// Runs config.rounds rounds of select, broadcast, client_update, aggregate,
/// evaluate. Output is independent of config.workers.
RunResult run_federation(const EngineConfig& config, const FederatedDataset& data, Strategy& strategy);

/// Population variance (divide by n).
double population_variance(std::span<const double> xs);

/// Sampling distribution over clients. Missing stats (empty) fall back to uniform.
std::vector<double> adaptive_sampling_probs(std::span<const double> stats, double gamma);
std::vector<double> sampling_probs(SamplingScheme scheme, std::span<const double> sizes,
                                   std::span<const double> stats, double gamma);

/// ceil(fraction * N) distinct ids drawn sequentially without replacement,
/// returned in ascending order.
std::vector<int> select_clients(SamplingScheme scheme, std::span<const double> sizes, std::span<const double> stats,
                                double fraction, double gamma, RngStream& rng);

/// Per-client aggregation weights implied by the weighting rule.
std::vector<double> aggregation_weights(const EngineConfig& config, std::span<const double> sizes);

/// Minibatch source over one client's data. An epoch is one pass over a
/// fresh shuffle; a full batch is the whole set in its stored order.
class BatchStream {
 public:
  BatchStream(const Batch& data, std::optional<int> batch_size, RngStream& rng);
  std::size_t batches_per_epoch() const { return per_epoch_; }
  Batch next();

 private:
  const Batch& data_;
  std::optional<int> batch_size_;
  RngStream& rng_;
  std::size_t per_epoch_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
};

using GradFn = std::function<ParamVector(const ParamVector& w, const Batch& batch)>;

/// `steps` SGD steps w <- w - lr * grad(w, batch).
ParamVector sgd_steps(BatchStream& stream, ParamVector w, std::size_t steps, double lr, const GradFn& grad);
/// ctx.local_epochs passes over the client's training data.
ParamVector sgd_epochs(ClientContext& ctx, ParamVector w, double lr, const GradFn& grad);
/// Plain loss gradient for ctx's model.
GradFn loss_grad(const ClientContext& ctx);

/// Fixed-size pool; parallel_for returns after every index ran. Exceptions
/// are collected and the one from the lowest index is rethrown.
class WorkerPool {
 public:
  explicit WorkerPool(int workers);
  ~WorkerPool();
  WorkerPool(const WorkerPool&) = delete;
  WorkerPool& operator=(const WorkerPool&) = delete;

  int size() const { return static_cast<int>(threads_.size()) + 1; }
  void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

 private:
  struct Shared;
  std::unique_ptr<Shared> shared_;
  std::vector<std::thread> threads_;
};

/// Resolves a worker count: explicit value, else FEDSIM_WORKERS, else 1.
int default_workers(std::optional<int> requested);

}  // namespace fedsim
