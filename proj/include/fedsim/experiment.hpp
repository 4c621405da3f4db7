#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fedsim/config.hpp"

namespace fedsim {

FederatedDataset build_dataset(const ExperimentConfig& config);

struct ExperimentRun {
  ExperimentConfig config;
  FederatedDataset data;
  RunResult result;
};

/// Builds the dataset and strategy and runs the federation.
ExperimentRun run_experiment(const ExperimentConfig& config);

/// One RoundRecord per line, each tagged with schema_version.
std::string metrics_jsonl(const RunResult& result);
json summary_json(const ExperimentRun& run);
std::string curves_csv(const RunResult& result);

/// Writes metrics.jsonl, summary.json and (if enabled) curves.csv into
/// config.output.dir. IO problems raise std::ios_base::failure.
void write_outputs(const ExperimentRun& run);

struct CompareRow {
  std::string strategy;
  double final_mean_loss = 0.0;
  double loss_variance = 0.0;
  std::optional<int> rounds_to_target;
  std::size_t floats = 0;
};
CompareRow compare_row(const ExperimentRun& run);
std::string compare_csv(const std::vector<CompareRow>& rows);

}  // namespace fedsim
