#include <cmath>
#include <sstream>

#include "fedsim/errors.hpp"
#include "strategies_internal.hpp"

namespace fedsim {

const json& HyperParams::at(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) fail(key, "missing");
  return *it;
}

void HyperParams::fail(const std::string& key, const std::string& what) const {
  throw ConfigError("strategy.params." + key, what + " (strategy " + strategy_ + ")");
}

double HyperParams::real(const std::string& key) const {
  const json& v = at(key);
  if (!v.is_number()) fail(key, "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) fail(key, "must be finite");
  return d;
}

std::optional<double> HyperParams::optional_real(const std::string& key) const {
  if (at(key).is_null()) return std::nullopt;
  return real(key);
}

int HyperParams::integer(const std::string& key) const {
  const json& v = at(key);
  if (!v.is_number_integer()) fail(key, "expected an integer");
  return v.get<int>();
}

bool HyperParams::boolean(const std::string& key) const {
  const json& v = at(key);
  if (!v.is_boolean()) fail(key, "expected true or false");
  return v.get<bool>();
}

std::string HyperParams::text(const std::string& key) const {
  const json& v = at(key);
  if (!v.is_string()) fail(key, "expected a string");
  return v.get<std::string>();
}

double HyperParams::real_in(const std::string& key, double lo, double hi) const {
  const double v = real(key);
  if (v < lo || v > hi) {
    std::ostringstream os;
    os << "must be in [" << lo << ", " << hi << "]";
    fail(key, os.str());
  }
  return v;
}

double HyperParams::nonnegative(const std::string& key) const {
  const double v = real(key);
  if (v < 0.0) fail(key, "must be >= 0");
  return v;
}

double HyperParams::positive(const std::string& key) const {
  const double v = real(key);
  if (!(v > 0.0)) fail(key, "must be > 0");
  return v;
}

namespace detail {

RngStream derive(const RngStream& parent, std::string_view tag) {
  return RngStream(splitmix64(parent.key() ^ fnv1a(tag)));
}

void GlobalModelStrategy::init_server(const ServerContext& ctx) {
  ctx_ = ctx;
  w_ = ctx.init_model(0);
}

std::vector<Message> GlobalModelStrategy::round_payload(int /*round*/, std::span<const int> selected) {
  Message m;
  m.vectors.emplace("w", *w_);
  return std::vector<Message>(selected.size(), m);
}

EvalModel GlobalModelStrategy::eval_model(const ClientState& /*state*/, ClientContext& /*ctx*/) const {
  return {{*w_}, {}};
}

json GlobalModelStrategy::server_state() const { return {{"w", w_->to_vector()}}; }

std::vector<ParamVector> GlobalModelStrategy::collect(std::span<const Message> uplinks, const std::string& key) const {
  std::vector<ParamVector> out;
  out.reserve(uplinks.size());
  for (const auto& m : uplinks) out.push_back(m.vec(key));
  return out;
}

void GlobalModelStrategy::step_towards_mean(std::span<const int> ids, std::span<const Message> uplinks,
                                            const std::string& key) {
  const auto vs = collect(uplinks, key);
  const ParamVector mean = ctx_.average(ids, vs);
  w_ = w_->axpy(ctx_.config.lr_server, mean - *w_);
}

ClientResult LocalSgdStrategy::client_update(const Message& payload, const ClientState& state,
                                             ClientContext& ctx) const {
  ParamVector w = sgd_epochs(ctx, payload.vec("w"), ctx.config->lr_local, local_gradient(payload, state, ctx));
  ClientResult r;
  r.uplink.vectors.emplace("w", std::move(w));
  r.state = state;
  return r;
}

void LocalSgdStrategy::aggregate(int /*round*/, std::span<const int> selected, std::span<const Message> uplinks) {
  step_towards_mean(selected, uplinks);
}

GradFn LocalSgdStrategy::local_gradient(const Message& /*payload*/, const ClientState& /*state*/,
                                        const ClientContext& ctx) const {
  return loss_grad(ctx);
}

}  // namespace detail
}  // namespace fedsim
