#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fedsim/config.hpp"
#include "fedsim/errors.hpp"
#include "fedsim/experiment.hpp"
#include "fedsim/gradcheck.hpp"

using namespace fedsim;
namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code = -1;
  std::string output;  // stdout and stderr
};

CliResult cli(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + (env.empty() ? "" : " ") + std::string(FEDSIM_CLI_PATH) + " " + args + " 2>&1";
  CliResult r;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 4096> buf{};
  std::size_t n;
  while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) r.output.append(buf.data(), n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

// Fresh scratch directory per test case, removed on scope exit.
struct Scratch {
  fs::path dir;
  explicit Scratch(const std::string& name) {
    dir = fs::temp_directory_path() / ("fedsim_test_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Scratch() {
    std::error_code ec;
    fs::remove_all(dir, ec);
  }
  std::string write(const std::string& name, const json& j) const { return write_text(name, j.dump(2)); }
  std::string write_text(const std::string& name, const std::string& text) const {
    std::ofstream(dir / name) << text;
    return (dir / name).string();
  }
  std::string path(const std::string& name) const { return (dir / name).string(); }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json minimal(int rounds = 5) {
  return {{"schema_version", 1},
          {"seed", 0},
          {"dataset", {{"kind", "quadratic"}, {"curvatures", {1.0, 3.0}}, {"optima", {0.0, 1.0}}}},
          {"strategy", {{"name", "fedavg"}}},
          {"engine", {{"rounds", rounds}, {"local_epochs", 2}, {"lr_local", 0.1}}}};
}

json sine_config() {
  return {{"schema_version", 1},
          {"seed", 3},
          {"dataset", {{"kind", "sine"}, {"clients", 6}, {"hidden", {8}}}},
          {"strategy", {{"name", "fedavg"}}},
          {"engine", {{"rounds", 4}, {"batch_size", 5}, {"lr_local", 0.05}}}};
}

std::string error_path(const json& j) {
  try {
    ExperimentConfig::from_json(j);
  } catch (const ConfigError& e) {
    return e.path();
  }
  return "<none>";
}

std::size_t line_count(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST_SUITE("config") {
  TEST_CASE("round trip is the identity") {
    for (const json& j : {minimal(), sine_config()}) {
      const ExperimentConfig a = ExperimentConfig::from_json(j);
      const json once = a.to_json();
      const json twice = ExperimentConfig::from_json(once).to_json();
      CHECK(once == twice);
      CHECK(once.at("schema_version") == kSchemaVersion);
    }
    json custom = minimal();
    custom["model"] = model_spec_to_json(ModelSpec::linear(1, 1, false));
    custom["strategy"] = {{"name", "fedprox"}, {"params", {{"mu", 0.3}}}};
    const json once = ExperimentConfig::from_json(custom).to_json();
    CHECK(ExperimentConfig::from_json(once).to_json() == once);
    CHECK(once.at("strategy").at("params").at("mu") == 0.3);
  }

  TEST_CASE("errors name the field path") {
    json j = minimal();
    j["engine"]["rouds"] = 3;
    CHECK(error_path(j) == "engine.rouds");
    j = minimal();
    j["engine"]["rounds"] = "many";
    CHECK(error_path(j) == "engine.rounds");
    j = minimal();
    j["engine"]["rounds"] = 0;
    CHECK(error_path(j) == "engine.rounds");
    j = minimal();
    j.erase("schema_version");
    CHECK(error_path(j) == "schema_version");
    j = minimal();
    j["schema_version"] = 99;
    CHECK(error_path(j) == "schema_version");
    j = minimal();
    j["strategy"]["name"] = "fedbogus";
    CHECK(error_path(j) == "strategy.name");
    j = minimal();
    j["strategy"]["params"] = {{"mu", 1.0}};
    CHECK(error_path(j) == "strategy.params.mu");
    j = minimal();
    j["dataset"]["curvatures"] = {1.0, -3.0};
    CHECK(error_path(j).rfind("dataset", 0) == 0);
    j = minimal();
    j["dataset"]["kind"] = "mnist";
    CHECK(error_path(j) == "dataset.kind");
    j = minimal();
    j["extra"] = true;
    CHECK(error_path(j) == "extra");
  }

  TEST_CASE("unknown strategy lists the registered names") {
    json j = minimal();
    j["strategy"]["name"] = "fedbogus";
    try {
      ExperimentConfig::from_json(j);
      FAIL("expected a config error");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("fedavg") != std::string::npos);
      CHECK(std::string(e.what()).find("scaffold") != std::string::npos);
    }
  }

  TEST_CASE("overrides") {
    json j = minimal();
    apply_override(j, "engine.rounds=7");
    apply_override(j, "strategy.name=fedprox");
    apply_override(j, "strategy.params.mu=0.5");
    apply_override(j, "engine.batch_size=full");
    CHECK(j["engine"]["rounds"] == 7);
    CHECK(j["strategy"]["name"] == "fedprox");
    CHECK(j["strategy"]["params"]["mu"] == 0.5);
    const ExperimentConfig c = ExperimentConfig::from_json(j);
    CHECK(c.engine.rounds == 7);
    CHECK_FALSE(c.engine.batch_size.has_value());
    CHECK_THROWS_AS(apply_override(j, "engine.rounds"), ConfigError);
    CHECK_THROWS_AS(apply_override(j, "engine..rounds=1"), ConfigError);
    CHECK_THROWS_AS(apply_override(j, "engine.rounds.x=1"), ConfigError);
  }

  TEST_CASE("published schema matches the built-in one") {
    const fs::path file = fs::path(FEDSIM_SOURCE_DIR) / "schema" / "config.schema.json";
    REQUIRE(fs::exists(file));
    CHECK(json::parse(slurp(file.string())) == config_schema());
  }

  TEST_CASE("sample configs parse and round-trip") {
    int seen = 0;
    for (const auto& entry : fs::directory_iterator(fs::path(FEDSIM_SOURCE_DIR) / "configs")) {
      if (entry.path().extension() != ".json") continue;
      CAPTURE(entry.path().string());
      const ExperimentConfig c = load_config(entry.path().string());
      CHECK(ExperimentConfig::from_json(c.to_json()).to_json() == c.to_json());
      ++seen;
    }
    CHECK(seen > 0);
  }

  TEST_CASE("artifacts carry schema_version") {
    ExperimentConfig c = ExperimentConfig::from_json(minimal(3));
    const ExperimentRun run = run_experiment(c);
    std::istringstream lines(metrics_jsonl(run.result));
    std::string line;
    int n = 0;
    while (std::getline(lines, line)) {
      CHECK(json::parse(line).at("schema_version") == kSchemaVersion);
      ++n;
    }
    CHECK(n == 3);
    CHECK(summary_json(run).at("schema_version") == kSchemaVersion);
    const std::string csv = curves_csv(run.result);
    CHECK(csv.rfind("schema_version,", 0) == 0);
    CHECK(line_count(csv) == 4);
  }
}

TEST_SUITE("cli") {
  TEST_CASE("run writes three artifacts with one jsonl line per round") {
    Scratch s("run");
    const std::string cfg = s.write("c.json", minimal(5));
    const auto r = cli("run " + cfg + " --out " + s.path("out"));
    CHECK(r.code == 0);
    for (const char* f : {"metrics.jsonl", "summary.json", "curves.csv"}) CHECK(fs::exists(s.path("out/") + f));
    const std::string jsonl = slurp(s.path("out/metrics.jsonl"));
    CHECK(line_count(jsonl) == 5);
    const json summary = json::parse(slurp(s.path("out/summary.json")));
    CHECK(summary.at("schema_version") == kSchemaVersion);
    CHECK(summary.at("rounds_run") == 5);
    CHECK(summary.contains("communication"));
    CHECK(summary.at("final").contains("loss_variance"));
  }

  TEST_CASE("seed override and reproducibility") {
    Scratch s("seed");
    const std::string cfg = s.write("c.json", sine_config());
    REQUIRE(cli("run " + cfg + " --out " + s.path("a")).code == 0);
    REQUIRE(cli("run " + cfg + " --out " + s.path("b")).code == 0);
    REQUIRE(cli("run " + cfg + " --seed 11 --out " + s.path("c")).code == 0);
    REQUIRE(cli("run " + cfg + " --workers 4 --out " + s.path("d")).code == 0);
    REQUIRE(cli("run " + cfg + " --out " + s.path("e"), "FEDSIM_WORKERS=3").code == 0);
    const std::string a = slurp(s.path("a/metrics.jsonl"));
    CHECK(a == slurp(s.path("b/metrics.jsonl")));
    CHECK(a != slurp(s.path("c/metrics.jsonl")));
    CHECK(a == slurp(s.path("d/metrics.jsonl")));
    CHECK(a == slurp(s.path("e/metrics.jsonl")));
    const json d = json::parse(slurp(s.path("d/summary.json")));
    CHECK(d.at("config").at("engine").at("workers") == 4);
    const json e = json::parse(slurp(s.path("e/summary.json")));
    CHECK(e.at("config").at("engine").at("workers") == 3);
  }

  TEST_CASE("set overrides") {
    Scratch s("set");
    const std::string cfg = s.write("c.json", minimal(5));
    const auto r = cli("run " + cfg + " --set engine.rounds=2 --set strategy.name=scaffold --out " + s.path("o"));
    REQUIRE(r.code == 0);
    const json summary = json::parse(slurp(s.path("o/summary.json")));
    CHECK(summary.at("rounds_run") == 2);
    CHECK(summary.at("strategy") == "scaffold");
  }

  TEST_CASE("exit codes") {
    Scratch s("codes");
    json bad = minimal();
    bad["engine"]["rouds"] = 3;
    auto r = cli("run " + s.write("bad.json", bad) + " --out " + s.path("o"));
    CHECK(r.code == 2);
    CHECK(r.output.find("engine.rouds") != std::string::npos);

    json unknown = minimal();
    unknown["strategy"]["name"] = "fedbogus";
    r = cli("run " + s.write("unknown.json", unknown) + " --out " + s.path("o"));
    CHECK(r.code == 2);
    CHECK(r.output.find("fedavg") != std::string::npos);

    r = cli("run " + s.write_text("broken.json", "{\"schema_version\": 1,") + " --out " + s.path("o"));
    CHECK(r.code == 2);
    r = cli("run " + s.path("missing.json"));
    CHECK(r.code == 4);
    r = cli("run --bogus-flag x");
    CHECK(r.code == 2);

    json diverge = minimal(50);
    diverge["engine"]["lr_local"] = 10.0;
    r = cli("run " + s.write("diverge.json", diverge) + " --out " + s.path("o"));
    CHECK(r.code == 3);
    CHECK(r.output.find("diverged at round") != std::string::npos);

    // output path collides with an existing file
    s.write_text("occupied", "x");
    r = cli("run " + s.write("ok.json", minimal(2)) + " --out " + s.path("occupied"));
    CHECK(r.code == 4);

    json csv = minimal();
    csv["dataset"] = {{"kind", "csv"}, {"path", std::string(FEDSIM_TEST_DATA_DIR) + "/bad_cell.csv"},
                      {"partition_column", "site"}};
    csv["engine"]["lr_local"] = 0.01;
    r = cli("run " + s.write("csv.json", csv) + " --out " + s.path("o"));
    CHECK(r.code == 4);
  }

  TEST_CASE("compare") {
    Scratch s("compare");
    const std::string a = s.write("fedavg.json", minimal(300));
    json sc = minimal(300);
    sc["strategy"]["name"] = "scaffold";
    const std::string b = s.write("scaffold.json", sc);

    auto r = cli("compare " + a);
    REQUIRE(r.code == 0);
    CHECK(line_count(r.output) == 2);  // header and one row

    r = cli("compare " + a + " " + a);
    REQUIRE(r.code == 0);
    std::istringstream rows(r.output);
    std::string header, one, two;
    std::getline(rows, header);
    std::getline(rows, one);
    std::getline(rows, two);
    CHECK(header.find("strategy") != std::string::npos);
    CHECK(one == two);

    r = cli("compare " + a + " " + b + " --out " + s.path("cmp"));
    REQUIRE(r.code == 0);
    CHECK(fs::exists(s.path("cmp/compare.csv")));
    // scaffold lands on the optimum, fedavg on its drifted fixed point
    const auto w_of = [&](const std::string& cfg, const std::string& out) {
      REQUIRE(cli("run " + cfg + " --out " + s.path(out)).code == 0);
      return json::parse(slurp(s.path(out + "/summary.json"))).at("server_state").at("w")[0].get<double>();
    };
    CHECK(std::abs(w_of(b, "rb") - 0.75) < std::abs(w_of(a, "ra") - 0.75));
  }

  TEST_CASE("gradcheck") {
    auto r = cli("gradcheck --trials 5");
    CHECK(r.code == 0);
    r = cli("gradcheck --trials 0");
    CHECK(r.code == 0);
    r = cli("gradcheck --trials 3 --family linear --corrupt gradient");
    CHECK(r.code != 0);
    CHECK(r.output.find("linear/gradient") != std::string::npos);
    r = cli("gradcheck --trials 3 --corrupt hvp");
    CHECK(r.code != 0);
    CHECK(r.output.find("/hvp") != std::string::npos);
    CHECK(r.output.find("/gradient") == std::string::npos);

    GradcheckOptions o;
    o.trials = 0;
    CHECK(run_gradcheck(o).pass());
    o.trials = 5;
    o.corrupt_op = "meta_gradient";
    const auto rep = run_gradcheck(o);
    CHECK_FALSE(rep.pass());
    for (const auto& f : rep.failures()) CHECK(f.find("/meta_gradient") != std::string::npos);
  }

  TEST_CASE("list") {
    const auto a = cli("list");
    CHECK(a.code == 0);
    CHECK(!a.output.empty());
    CHECK(a.output.find("fedavg") != std::string::npos);
    CHECK(a.output == cli("list").output);
    const auto j = cli("list --json");
    REQUIRE(j.code == 0);
    const json arr = json::parse(j.output);
    CHECK(arr.size() == 30);
    std::vector<std::string> names;
    for (const auto& e : arr) names.push_back(e.at("name"));
    CHECK(std::is_sorted(names.begin(), names.end()));
  }

  TEST_CASE("schema subcommand") {
    const auto r = cli("schema");
    REQUIRE(r.code == 0);
    CHECK(json::parse(r.output) == config_schema());
  }
}
