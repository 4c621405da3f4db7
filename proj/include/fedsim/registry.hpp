#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fedsim/engine.hpp"

namespace fedsim {

/// Strategy hyperparameters after defaults are merged in. Accessors raise
/// ConfigError with a strategy.params.<key> path on type or range problems.
class HyperParams {
 public:
  HyperParams(std::string strategy, json values) : strategy_(std::move(strategy)), values_(std::move(values)) {}

  double real(const std::string& key) const;
  std::optional<double> optional_real(const std::string& key) const;  // null -> nullopt
  int integer(const std::string& key) const;
  bool boolean(const std::string& key) const;
  std::string text(const std::string& key) const;

  double real_in(const std::string& key, double lo, double hi) const;  // closed interval
  double nonnegative(const std::string& key) const;
  double positive(const std::string& key) const;

  [[noreturn]] void fail(const std::string& key, const std::string& what) const;
  const std::string& strategy() const { return strategy_; }
  const json& values() const { return values_; }

 private:
  const json& at(const std::string& key) const;
  std::string strategy_;
  json values_;
};

struct ParamInfo {
  std::string key;
  json default_value;
  std::string help;
};

struct StrategyInfo {
  std::string name;
  std::string category;  // global, personalized, meta, fairness, clustering
  std::string summary;
  std::vector<ParamInfo> params;
  std::function<std::unique_ptr<Strategy>(const HyperParams&)> make;
};

/// Every registered strategy, sorted by name.
const std::vector<StrategyInfo>& strategy_registry();
std::vector<std::string> strategy_names();

/// Lookup; unknown names raise ConfigError("strategy.name") listing the registry.
const StrategyInfo& strategy_info(const std::string& name);

/// User params merged over defaults. Unknown keys are a ConfigError.
json resolve_params(const std::string& name, const json& params);

std::unique_ptr<Strategy> make_strategy(const std::string& name, const json& params = json::object());

}  // namespace fedsim
