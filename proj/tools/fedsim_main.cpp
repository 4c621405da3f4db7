// fedsim command-line front end.
//
// Exit codes: 0 ok, 1 other failure, 2 invalid config (field path printed),
// 3 divergence (round printed), 4 IO error.

#include <CLI11.hpp>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "fedsim/config.hpp"
#include "fedsim/errors.hpp"
#include "fedsim/experiment.hpp"
#include "fedsim/gradcheck.hpp"
#include "fedsim/registry.hpp"

using namespace fedsim;

namespace {

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> workers;
  std::vector<std::string> sets;
};

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::ios_base::failure("cannot open config '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("$", std::string("invalid JSON: ") + e.what());
  }
}

// Flags win over --set, which wins over the file. Worker count falls back to
// FEDSIM_WORKERS when neither the flags nor the file give one.
ExperimentConfig resolve_config(const std::string& path, const Overrides& o) {
  json j = read_json(path);
  for (const auto& s : o.sets) apply_override(j, s);
  if (o.seed) j["seed"] = *o.seed;
  if (o.out) j["output"]["dir"] = *o.out;
  const bool file_sets_workers = j.is_object() && j.contains("engine") && j["engine"].is_object() &&
                                 j["engine"].contains("workers");
  if (o.workers || !file_sets_workers) {
    if (j.is_object() && (!j.contains("engine") || j["engine"].is_null())) j["engine"] = json::object();
    if (j.is_object() && j["engine"].is_object()) j["engine"]["workers"] = default_workers(o.workers);
  }
  return ExperimentConfig::from_json(j);
}

void add_override_flags(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--seed", o.seed, "experiment seed");
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--workers", o.workers, "client worker threads (default: FEDSIM_WORKERS or 1)")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--set", o.sets, "override a config field, e.g. --set engine.rounds=50")->allow_extra_args(false);
}

int cmd_run(const std::string& path, const Overrides& o) {
  const ExperimentConfig config = resolve_config(path, o);
  const ExperimentRun run = run_experiment(config);
  write_outputs(run);
  const auto& last = run.result.records.back();
  std::cout << config.strategy.name << ": " << run.result.records.size() << " rounds, mean test loss "
            << last.mean_test_loss << ", loss variance " << last.loss_variance << " -> " << config.output.dir << "\n";
  return 0;
}

int cmd_compare(const std::vector<std::string>& paths, const Overrides& o) {
  std::vector<CompareRow> rows;
  for (const auto& p : paths) rows.push_back(compare_row(run_experiment(resolve_config(p, o))));
  const std::string table = compare_csv(rows);
  std::cout << table;
  if (o.out) {
    std::filesystem::create_directories(*o.out);
    std::ofstream f(std::filesystem::path(*o.out) / "compare.csv", std::ios::binary);
    if (!(f << table)) throw std::ios_base::failure("cannot write compare.csv in '" + *o.out + "'");
  }
  return 0;
}

int cmd_gradcheck(const GradcheckOptions& opt) {
  const GradcheckReport report = run_gradcheck(opt);
  if (report.entries.empty()) {
    std::cout << "gradcheck: nothing to check\n";
    return 0;
  }
  for (const auto& e : report.entries) {
    std::cout << std::left << std::setw(20) << e.family << std::setw(15) << e.op << " trials=" << e.trials
              << " max_rel_err=" << std::scientific << std::setprecision(2) << e.max_rel_error << " tol=" << e.tol
              << std::defaultfloat << (e.pass() ? "  ok" : "  FAIL") << "\n";
  }
  if (!report.pass()) {
    std::cerr << "gradcheck failed:";
    for (const auto& f : report.failures()) std::cerr << " " << f;
    std::cerr << "\n";
    return 1;
  }
  return 0;
}

int cmd_list(bool as_json) {
  if (as_json) {
    json out = json::array();
    for (const auto& s : strategy_registry()) {
      json params = json::object();
      for (const auto& p : s.params) params[p.key] = p.default_value;
      out.push_back({{"name", s.name}, {"category", s.category}, {"summary", s.summary}, {"params", params}});
    }
    std::cout << out.dump(2) << "\n";
    return 0;
  }
  for (const auto& s : strategy_registry()) {
    std::cout << s.name << "  [" << s.category << "]  " << s.summary << "\n";
    for (const auto& p : s.params) {
      std::cout << "    " << p.key << " = " << p.default_value.dump() << "  (" << p.help << ")\n";
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fedsim: federated learning strategy simulator"};
  app.require_subcommand(1);

  Overrides run_o;
  std::string run_path;
  auto* run = app.add_subcommand("run", "run one experiment config");
  run->add_option("config", run_path, "experiment config (JSON)")->required();
  add_override_flags(run, run_o);

  Overrides cmp_o;
  std::vector<std::string> cmp_paths;
  auto* cmp = app.add_subcommand("compare", "run several configs and print a CSV table");
  cmp->add_option("configs", cmp_paths, "experiment configs")->required();
  add_override_flags(cmp, cmp_o);

  GradcheckOptions gc;
  auto* grad = app.add_subcommand("gradcheck", "finite-difference checks of all analytic derivatives");
  grad->add_option("--trials", gc.trials, "random trials per family and op")->check(CLI::NonNegativeNumber);
  grad->add_option("--seed", gc.seed, "seed for random parameters and data");
  grad->add_option("--family", gc.families, "restrict to these model families");
  grad->add_option("--gradient-tol", gc.gradient_tol, "tolerance for first-order gradients");
  grad->add_option("--second-order-tol", gc.second_order_tol, "tolerance for hvp and meta-gradients");
  grad->add_option("--corrupt", gc.corrupt_op, "perturb one op's analytic result (test fixture)")
      ->group("")
      ->check(CLI::IsMember({"gradient", "hvp", "meta_gradient", "metasgd_joint"}));

  bool list_json = false;
  auto* list = app.add_subcommand("list", "registered strategies and their hyperparameters");
  list->add_flag("--json", list_json, "machine-readable output");

  std::string schema_out;
  auto* schema = app.add_subcommand("schema", "print the experiment config JSON Schema");
  schema->add_option("--out", schema_out, "write to this file instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (*run) return cmd_run(run_path, run_o);
    if (*cmp) return cmd_compare(cmp_paths, cmp_o);
    if (*grad) return cmd_gradcheck(gc);
    if (*list) return cmd_list(list_json);
    if (*schema) {
      const std::string text = config_schema().dump(2) + "\n";
      if (schema_out.empty()) {
        std::cout << text;
      } else {
        std::ofstream f(schema_out, std::ios::binary);
        if (!(f << text)) throw std::ios_base::failure("cannot write '" + schema_out + "'");
      }
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error at " << (e.path().empty() ? "$" : e.path()) << ": " << e.what() << "\n";
    return 2;
  } catch (const DivergenceError& e) {
    std::cerr << "diverged at round " << e.round() << ": " << e.what() << "\n";
    return 3;
  } catch (const ParseError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 4;
  } catch (const std::ios_base::failure& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 4;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
