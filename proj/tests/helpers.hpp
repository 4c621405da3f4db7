#pragma once

#include <doctest.h>

#include <cmath>
#include <vector>

#include "fedsim/engine.hpp"
#include "fedsim/experiment.hpp"
#include "fedsim/param.hpp"
#include "fedsim/registry.hpp"

namespace fedsim::test {

inline ParamVector vec(std::vector<double> v) {
  const std::size_t n = v.size();
  return ParamVector(LayerLayout::flat(n), std::move(v));
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  REQUIRE(a.size() == b.size());
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline RunResult run(const std::string& strategy, const json& params, const EngineConfig& config,
                     const FederatedDataset& data) {
  auto s = make_strategy(strategy, params);
  return run_federation(config, data, *s);
}

inline std::vector<double> server_w(const RunResult& r) { return r.server_state.at("w").get<std::vector<double>>(); }

inline std::string jsonl(const RunResult& r) { return metrics_jsonl(r); }

inline EngineConfig drift_config(int rounds) {
  EngineConfig c;
  c.rounds = rounds;
  c.local_epochs = 2;
  c.lr_local = 0.1;
  return c;
}

// w <- w - lr * mean_i grad F_i(w) from the engine's initial model.
inline std::vector<double> centralized_gd(const FederatedDataset& data, const EngineConfig& config, int steps) {
  ServerContext ctx;
  ctx.data = &data;
  ctx.spec = data.spec;
  ctx.config = config;
  ParamVector w = ctx.init_model(0);
  for (int t = 0; t < steps; ++t) {
    ParamVector g = ParamVector::zeros(w.layout());
    for (const auto& c : data.clients) g = g + gradient(data.spec, w, c.train);
    w = w.axpy(-config.lr_local / static_cast<double>(data.size()), g);
  }
  return w.to_vector();
}

}  // namespace fedsim::test
