#include "fedsim/experiment.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "fedsim/errors.hpp"
#include "fedsim/registry.hpp"

namespace fedsim {

namespace {

std::optional<std::vector<double>> maybe_reals(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<std::vector<double>>();
}

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::ios_base::failure("cannot open '" + path.string() + "' for writing");
  out << content;
  out.flush();
  if (!out) throw std::ios_base::failure("write to '" + path.string() + "' failed");
}

}  // namespace

FederatedDataset build_dataset(const ExperimentConfig& config) {
  const json& o = config.dataset.options;
  const std::uint64_t seed = config.dataset.seed.value_or(config.seed);
  const std::string& kind = config.dataset.kind;
  FederatedDataset data;
  if (kind == "quadratic") {
    data = gen_quadratic_clients(o.at("curvatures").get<std::vector<double>>(), o.at("optima").get<std::vector<double>>(),
                                 o.at("points_per_client").get<int>());
  } else if (kind == "sine") {
    SineOptions s;
    s.clients = o.at("clients");
    s.points_per_client = o.at("points_per_client");
    s.test_points = o.at("test_points");
    s.noise_sd = o.at("noise_sd");
    s.hidden = o.at("hidden").get<std::vector<int>>();
    s.phases = maybe_reals(o.at("phases"));
    s.seed = seed;
    data = gen_sine_clients(s);
  } else if (kind == "label_skew") {
    LabelSkewOptions s;
    s.clients = o.at("clients");
    s.classes = o.at("classes");
    s.alpha = o.at("alpha");
    s.total_points = o.at("total_points");
    s.test_points = o.at("test_points");
    s.input_dim = o.at("input_dim");
    s.class_separation = o.at("class_separation");
    s.seed = seed;
    data = gen_label_skew_classification(s);
  } else if (kind == "concept_shift") {
    ConceptShiftOptions s;
    s.clients = o.at("clients");
    s.clusters = o.at("clusters");
    s.input_dim = o.at("input_dim");
    s.points_per_client = o.at("points_per_client");
    s.test_points = o.at("test_points");
    s.noise_sd = o.at("noise_sd");
    s.truth_scale = o.at("truth_scale");
    if (!o.at("truths").is_null()) s.truths = o.at("truths").get<std::vector<std::vector<double>>>();
    s.seed = seed;
    data = gen_concept_shift_regression(s);
  } else if (kind == "csv") {
    CsvOptions s;
    s.partition_column = o.at("partition_column");
    if (!o.at("target_column").is_null()) s.target_column = o.at("target_column").get<std::string>();
    if (!o.at("group_column").is_null()) s.group_column = o.at("group_column").get<std::string>();
    s.classification = o.at("classification");
    s.test_fraction = o.at("test_fraction");
    s.seed = seed;
    data = load_csv_partition(o.at("path").get<std::string>(), s);
  } else {
    throw ConfigError("dataset.kind", "unknown kind '" + kind + "'");
  }
  if (config.model) {
    const ModelSpec& m = *config.model;
    if (m.input_dim != data.spec.input_dim) {
      throw ConfigError("model.input_dim", "dataset has input dimension " + std::to_string(data.spec.input_dim));
    }
    if (m.target_dim() != data.spec.target_dim() || m.classification() != data.spec.classification()) {
      throw ConfigError("model", "incompatible with the dataset targets");
    }
    data.spec = m;
  }
  return data;
}

ExperimentRun run_experiment(const ExperimentConfig& config) {
  ExperimentRun run{config, build_dataset(config), {}};
  auto strategy = make_strategy(config.strategy.name, config.strategy.params);
  run.result = run_federation(config.engine, run.data, *strategy);
  return run;
}

std::string metrics_jsonl(const RunResult& result) {
  std::string out;
  for (const auto& r : result.records) {
    json j = r.to_json();
    j["schema_version"] = kSchemaVersion;
    out += j.dump();
    out += '\n';
  }
  return out;
}

json summary_json(const ExperimentRun& run) {
  const auto& recs = run.result.records;
  json s;
  s["schema_version"] = kSchemaVersion;
  s["strategy"] = run.config.strategy.name;
  s["params"] = run.config.strategy.params;
  s["dataset"] = run.config.dataset.kind;
  s["clients"] = run.data.size();
  s["rounds_run"] = recs.size();
  std::size_t up = 0;
  std::size_t down = 0;
  for (const auto& r : recs) {
    up += r.floats_uplink;
    down += r.floats_downlink;
  }
  s["communication"] = {{"floats_uplink", up}, {"floats_downlink", down}, {"floats_total", up + down}};
  if (!recs.empty()) {
    const RoundRecord& last = recs.back();
    json clients = json::array();
    for (std::size_t i = 0; i < run.data.size(); ++i) {
      json c = {{"client_id", i}, {"train_loss", last.train_loss[i]}};
      if (!last.test_loss.empty()) c["test_loss"] = last.test_loss[i];
      if (!last.train_accuracy.empty()) c["train_accuracy"] = last.train_accuracy[i];
      if (!last.test_accuracy.empty()) c["test_accuracy"] = last.test_accuracy[i];
      clients.push_back(std::move(c));
    }
    s["final"] = {{"round", last.round},
                  {"mean_train_loss", last.mean_train_loss},
                  {"mean_test_loss", last.mean_test_loss},
                  {"variance_metric", last.variance_metric},
                  {"loss_variance", last.loss_variance},
                  {"clients", clients}};
  }
  const CompareRow row = compare_row(run);
  s["rounds_to_target"] = row.rounds_to_target ? json(*row.rounds_to_target) : json();
  s["server_state"] = run.result.server_state;
  s["config"] = run.config.to_json();
  return s;
}

std::string curves_csv(const RunResult& result) {
  std::string out =
      "schema_version,round,mean_train_loss,mean_test_loss,loss_variance,floats_uplink,floats_downlink\n";
  for (const auto& r : result.records) {
    out += std::to_string(kSchemaVersion) + "," + std::to_string(r.round) + "," + fmt(r.mean_train_loss) + "," +
           fmt(r.mean_test_loss) + "," + fmt(r.loss_variance) + "," + std::to_string(r.floats_uplink) + "," +
           std::to_string(r.floats_downlink) + "\n";
  }
  return out;
}

void write_outputs(const ExperimentRun& run) {
  const std::filesystem::path dir(run.config.output.dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::ios_base::failure("cannot create output directory '" + dir.string() + "': " + ec.message());
  write_file(dir / "metrics.jsonl", metrics_jsonl(run.result));
  write_file(dir / "summary.json", summary_json(run).dump(2) + "\n");
  if (run.config.output.curves) write_file(dir / "curves.csv", curves_csv(run.result));
}

CompareRow compare_row(const ExperimentRun& run) {
  CompareRow row;
  row.strategy = run.config.strategy.name;
  const auto& recs = run.result.records;
  if (!recs.empty()) {
    row.final_mean_loss = recs.back().mean_test_loss;
    row.loss_variance = recs.back().loss_variance;
  }
  for (const auto& r : recs) {
    row.floats += r.floats_uplink + r.floats_downlink;
    if (!row.rounds_to_target && run.config.engine.target_loss && r.mean_test_loss <= *run.config.engine.target_loss) {
      row.rounds_to_target = r.round;
    }
  }
  return row;
}

std::string compare_csv(const std::vector<CompareRow>& rows) {
  std::string out = "strategy,final_mean_loss,loss_variance,rounds_to_target,floats\n";
  for (const auto& r : rows) {
    out += r.strategy + "," + fmt(r.final_mean_loss) + "," + fmt(r.loss_variance) + "," +
           (r.rounds_to_target ? std::to_string(*r.rounds_to_target) : std::string()) + "," +
           std::to_string(r.floats) + "\n";
  }
  return out;
}

}  // namespace fedsim
