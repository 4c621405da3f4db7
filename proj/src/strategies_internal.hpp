#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fedsim/engine.hpp"
#include "fedsim/registry.hpp"
#include "fedsim/strategies.hpp"

namespace fedsim::detail {

/// Child stream for a second independent use of a context's randomness.
RngStream derive(const RngStream& parent, std::string_view tag);

/// Strategies with one server model w, broadcast as "w".
class GlobalModelStrategy : public Strategy {
 public:
  void init_server(const ServerContext& ctx) override;
  std::vector<Message> round_payload(int round, std::span<const int> selected) override;
  EvalModel eval_model(const ClientState& state, ClientContext& ctx) const override;
  json server_state() const override;

  const ParamVector& global() const { return *w_; }

 protected:
  /// w <- w + lr_server * (weighted mean of uplinked `key` - w)
  void step_towards_mean(std::span<const int> ids, std::span<const Message> uplinks, const std::string& key = "w");
  std::vector<ParamVector> collect(std::span<const Message> uplinks, const std::string& key) const;

  ServerContext ctx_;
  std::optional<ParamVector> w_;
};

/// Broadcast w, run E local epochs of SGD on a strategy-specific gradient,
/// uplink the local model, move w toward the mean.
class LocalSgdStrategy : public GlobalModelStrategy {
 public:
  ClientResult client_update(const Message& payload, const ClientState& state, ClientContext& ctx) const override;
  void aggregate(int round, std::span<const int> selected, std::span<const Message> uplinks) override;

 protected:
  virtual GradFn local_gradient(const Message& payload, const ClientState& state, const ClientContext& ctx) const;
};

std::unique_ptr<Strategy> make_fedavg(const HyperParams& p);
std::unique_ptr<Strategy> make_fedsgd(const HyperParams& p);
std::unique_ptr<Strategy> make_fedprox(const HyperParams& p);
std::unique_ptr<Strategy> make_dane(const HyperParams& p);
std::unique_ptr<Strategy> make_scaffold(const HyperParams& p);
std::unique_ptr<Strategy> make_fedsvrg(const HyperParams& p);
std::unique_ptr<Strategy> make_feddyn(const HyperParams& p);
std::unique_ptr<Strategy> make_fedpd(const HyperParams& p);
std::unique_ptr<Strategy> make_fedsplit(const HyperParams& p);
std::unique_ptr<Strategy> make_fedadam(const HyperParams& p);
std::unique_ptr<Strategy> make_fedyogi(const HyperParams& p);
std::unique_ptr<Strategy> make_fedavgm(const HyperParams& p);
std::unique_ptr<Strategy> make_fedac(const HyperParams& p);
std::unique_ptr<Strategy> make_loadaboost(const HyperParams& p);
std::unique_ptr<Strategy> make_fedensemble(const HyperParams& p);

std::unique_ptr<Strategy> make_ttp(const HyperParams& p);
std::unique_ptr<Strategy> make_local(const HyperParams& p);
std::unique_ptr<Strategy> make_ditto(const HyperParams& p);
std::unique_ptr<Strategy> make_pfedme(const HyperParams& p);
std::unique_ptr<Strategy> make_l2gd(const HyperParams& p);
std::unique_ptr<Strategy> make_fedper(const HyperParams& p);
std::unique_ptr<Strategy> make_lgfedavg(const HyperParams& p);
std::unique_ptr<Strategy> make_apfl(const HyperParams& p);
std::unique_ptr<Strategy> make_perfedavg(const HyperParams& p);
std::unique_ptr<Strategy> make_metasgd(const HyperParams& p);

std::unique_ptr<Strategy> make_qffl(const HyperParams& p);
std::unique_ptr<Strategy> make_gifair(const HyperParams& p);
std::unique_ptr<Strategy> make_afl(const HyperParams& p);
std::unique_ptr<Strategy> make_hypcluster(const HyperParams& p);
std::unique_ptr<Strategy> make_cfl(const HyperParams& p);

}  // namespace fedsim::detail
