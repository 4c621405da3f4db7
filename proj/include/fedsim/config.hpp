#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fedsim/datagen.hpp"
#include "fedsim/engine.hpp"

namespace fedsim {

inline constexpr int kSchemaVersion = 1;

/// `options` holds the kind-specific keys with every default filled in.
struct DatasetConfig {
  std::string kind = "quadratic";  // quadratic | sine | label_skew | concept_shift | csv
  json options = json::object();
  std::optional<std::uint64_t> seed;  // defaults to the experiment seed
};

struct StrategyConfig {
  std::string name = "fedavg";
  json params = json::object();  // merged with registry defaults
};

struct OutputConfig {
  std::string dir = "out";
  bool curves = true;
};

struct ExperimentConfig {
  int schema_version = kSchemaVersion;
  std::uint64_t seed = 0;
  DatasetConfig dataset;
  std::optional<ModelSpec> model;  // absent: the generator's model
  StrategyConfig strategy;
  EngineConfig engine;
  OutputConfig output;

  /// Strict parse: unknown keys, wrong types and out-of-range values raise
  /// ConfigError naming the field path.
  static ExperimentConfig from_json(const json& j);
  json to_json() const;
};

ExperimentConfig load_config(const std::string& path);  // IO problems raise std::ios_base::failure

/// Applies `a.b.c=value`. The value is parsed as JSON when it can be,
/// otherwise taken as a string.
void apply_override(json& config, const std::string& assignment);

json model_spec_to_json(const ModelSpec& spec);
ModelSpec model_spec_from_json(const json& j, const std::string& path);

/// JSON Schema (draft 2020-12) for experiment configs.
json config_schema();

}  // namespace fedsim
