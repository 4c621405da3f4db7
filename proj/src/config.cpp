#include "fedsim/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "fedsim/errors.hpp"
#include "fedsim/registry.hpp"

namespace fedsim {

namespace {

// Typed field access on one JSON object, tracking which keys were consumed.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_.empty() ? "$" : path_, "expected an object");
  }

  std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    if (!j_.contains(key)) throw ConfigError(at(key), "missing");
    return j_.at(key);
  }
  json raw_or_null(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key) ? j_.at(key) : json();
  }

  double real(const std::string& key, double def) {
    seen_.insert(key);
    if (!j_.contains(key)) return def;
    return as_real(j_.at(key), at(key));
  }
  std::optional<double> optional_real(const std::string& key) {
    seen_.insert(key);
    if (!has(key)) return std::nullopt;
    return as_real(j_.at(key), at(key));
  }
  int integer(const std::string& key, int def) {
    seen_.insert(key);
    if (!j_.contains(key)) return def;
    return as_int(j_.at(key), at(key));
  }
  std::optional<int> optional_integer(const std::string& key) {
    seen_.insert(key);
    if (!has(key)) return std::nullopt;
    return as_int(j_.at(key), at(key));
  }
  bool boolean(const std::string& key, bool def) {
    seen_.insert(key);
    if (!j_.contains(key)) return def;
    if (!j_.at(key).is_boolean()) throw ConfigError(at(key), "expected true or false");
    return j_.at(key).get<bool>();
  }
  std::string text(const std::string& key, const std::string& def) {
    seen_.insert(key);
    if (!j_.contains(key)) return def;
    if (!j_.at(key).is_string()) throw ConfigError(at(key), "expected a string");
    return j_.at(key).get<std::string>();
  }
  std::optional<std::string> optional_text(const std::string& key) {
    seen_.insert(key);
    if (!has(key)) return std::nullopt;
    return text(key, "");
  }
  std::vector<double> reals(const std::string& key, std::vector<double> def) {
    seen_.insert(key);
    if (!j_.contains(key)) return def;
    return as_reals(j_.at(key), at(key));
  }
  std::vector<int> integers(const std::string& key, std::vector<int> def) {
    seen_.insert(key);
    if (!j_.contains(key)) return def;
    const json& v = j_.at(key);
    if (!v.is_array()) throw ConfigError(at(key), "expected an array of integers");
    std::vector<int> out;
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(as_int(v[i], at(key) + "[" + std::to_string(i) + "]"));
    return out;
  }
  std::uint64_t seed(const std::string& key, std::uint64_t def) {
    seen_.insert(key);
    if (!j_.contains(key)) return def;
    const json& v = j_.at(key);
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
      throw ConfigError(at(key), "expected a non-negative integer");
    }
    return v.get<std::uint64_t>();
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw ConfigError(at(key), "unknown field");
    }
  }

  static double as_real(const json& v, const std::string& path) {
    if (!v.is_number()) throw ConfigError(path, "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ConfigError(path, "must be finite");
    return d;
  }
  static int as_int(const json& v, const std::string& path) {
    if (!v.is_number_integer()) throw ConfigError(path, "expected an integer");
    const auto x = v.get<std::int64_t>();
    if (x < INT32_MIN || x > INT32_MAX) throw ConfigError(path, "out of range");
    return static_cast<int>(x);
  }
  static std::vector<double> as_reals(const json& v, const std::string& path) {
    if (!v.is_array()) throw ConfigError(path, "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(as_real(v[i], path + "[" + std::to_string(i) + "]"));
    return out;
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void require(bool ok, const std::string& path, const std::string& what) {
  if (!ok) throw ConfigError(path, what);
}

json parse_dataset_options(const std::string& kind, Reader& r) {
  json o = json::object();
  auto positive_int = [&](const std::string& key, int def) {
    const int v = r.integer(key, def);
    require(v >= 1, r.at(key), "must be >= 1");
    o[key] = v;
    return v;
  };
  auto nonnegative_int = [&](const std::string& key, int def) {
    const int v = r.integer(key, def);
    require(v >= 0, r.at(key), "must be >= 0");
    o[key] = v;
  };
  auto nonnegative_real = [&](const std::string& key, double def) {
    const double v = r.real(key, def);
    require(v >= 0.0, r.at(key), "must be >= 0");
    o[key] = v;
  };

  if (kind == "quadratic") {
    const auto h = r.reals("curvatures", {1.0, 3.0});
    const auto a = r.reals("optima", {0.0, 1.0});
    require(!h.empty(), r.at("curvatures"), "must not be empty");
    require(h.size() == a.size(), r.at("optima"), "must have one entry per curvature");
    for (std::size_t i = 0; i < h.size(); ++i) {
      require(h[i] > 0.0, r.at("curvatures") + "[" + std::to_string(i) + "]", "must be > 0");
    }
    o["curvatures"] = h;
    o["optima"] = a;
    positive_int("points_per_client", 1);
  } else if (kind == "sine") {
    const int n = positive_int("clients", 50);
    positive_int("points_per_client", 20);
    nonnegative_int("test_points", 50);
    nonnegative_real("noise_sd", 0.0);
    const auto hidden = r.integers("hidden", {32});
    for (std::size_t i = 0; i < hidden.size(); ++i) {
      require(hidden[i] >= 1, r.at("hidden") + "[" + std::to_string(i) + "]", "must be >= 1");
    }
    o["hidden"] = hidden;
    const json phases = r.raw_or_null("phases");
    if (phases.is_null()) {
      o["phases"] = nullptr;
    } else {
      const auto p = Reader::as_reals(phases, r.at("phases"));
      require(p.size() == static_cast<std::size_t>(n), r.at("phases"), "must have one entry per client");
      o["phases"] = p;
    }
  } else if (kind == "label_skew") {
    positive_int("clients", 10);
    const int c = r.integer("classes", 3);
    require(c >= 2, r.at("classes"), "must be >= 2");
    o["classes"] = c;
    const double alpha = r.real("alpha", 0.5);
    require(alpha > 0.0, r.at("alpha"), "must be > 0");
    o["alpha"] = alpha;
    positive_int("total_points", 1000);
    nonnegative_int("test_points", 50);
    positive_int("input_dim", 2);
    nonnegative_real("class_separation", 3.0);
  } else if (kind == "concept_shift") {
    const int n = positive_int("clients", 10);
    const int g = positive_int("clusters", 2);
    require(g <= n, r.at("clusters"), "must not exceed clients");
    const int d = positive_int("input_dim", 1);
    positive_int("points_per_client", 20);
    nonnegative_int("test_points", 20);
    nonnegative_real("noise_sd", 0.0);
    nonnegative_real("truth_scale", 2.0);
    const json truths = r.raw_or_null("truths");
    if (truths.is_null()) {
      o["truths"] = nullptr;
    } else {
      const std::string path = r.at("truths");
      require(truths.is_array() && truths.size() == static_cast<std::size_t>(g), path,
              "expected one coefficient array per cluster");
      json rows = json::array();
      for (std::size_t k = 0; k < truths.size(); ++k) {
        const auto row = Reader::as_reals(truths[k], path + "[" + std::to_string(k) + "]");
        require(row.size() == static_cast<std::size_t>(d), path + "[" + std::to_string(k) + "]",
                "must have input_dim entries");
        rows.push_back(row);
      }
      o["truths"] = rows;
    }
  } else if (kind == "csv") {
    const std::string path = r.text("path", "");
    require(!path.empty(), r.at("path"), "missing");
    o["path"] = path;
    const std::string partition = r.text("partition_column", "");
    require(!partition.empty(), r.at("partition_column"), "missing");
    o["partition_column"] = partition;
    const auto target = r.optional_text("target_column");
    o["target_column"] = target ? json(*target) : json();
    const auto group = r.optional_text("group_column");
    o["group_column"] = group ? json(*group) : json();
    o["classification"] = r.boolean("classification", false);
    const double f = r.real("test_fraction", 0.2);
    require(f >= 0.0 && f < 1.0, r.at("test_fraction"), "must be in [0, 1)");
    o["test_fraction"] = f;
  } else {
    throw ConfigError("dataset.kind", "unknown kind '" + kind + "' (quadratic|sine|label_skew|concept_shift|csv)");
  }
  return o;
}

DatasetConfig parse_dataset(const json& j) {
  Reader r(j, "dataset");
  DatasetConfig d;
  d.kind = r.text("kind", "");
  if (d.kind.empty()) throw ConfigError("dataset.kind", "missing");
  if (r.has("seed")) d.seed = r.seed("seed", 0);
  r.raw_or_null("seed");
  d.options = parse_dataset_options(d.kind, r);
  r.finish();
  return d;
}

EngineConfig parse_engine(const json& j) {
  Reader r(j, "engine");
  EngineConfig e;
  e.rounds = r.integer("rounds", e.rounds);
  e.local_epochs = r.integer("local_epochs", e.local_epochs);
  e.client_epochs = r.integers("client_epochs", {});
  const json bs = r.raw_or_null("batch_size");
  if (bs.is_string()) {
    if (bs.get<std::string>() != "full") throw ConfigError("engine.batch_size", "expected an integer or \"full\"");
  } else if (!bs.is_null()) {
    e.batch_size = Reader::as_int(bs, "engine.batch_size");
  }
  e.lr_local = r.real("lr_local", e.lr_local);
  e.lr_server = r.real("lr_server", e.lr_server);
  e.sample_fraction = r.real("sample_fraction", e.sample_fraction);
  e.sampling = parse_sampling(r.text("sampling", to_string(e.sampling)));
  e.sampling_gamma = r.real("sampling_gamma", e.sampling_gamma);
  e.weighting = parse_weighting(r.text("weighting", to_string(e.weighting)));
  e.workers = r.integer("workers", e.workers);
  e.target_loss = r.optional_real("target_loss");
  e.timing = r.boolean("timing", e.timing);
  r.finish();
  e.validate();
  return e;
}

json engine_to_json(const EngineConfig& e) {
  json j;
  j["rounds"] = e.rounds;
  j["local_epochs"] = e.local_epochs;
  j["client_epochs"] = e.client_epochs;
  j["batch_size"] = e.batch_size ? json(*e.batch_size) : json("full");
  j["lr_local"] = e.lr_local;
  j["lr_server"] = e.lr_server;
  j["sample_fraction"] = e.sample_fraction;
  j["sampling"] = to_string(e.sampling);
  j["sampling_gamma"] = e.sampling_gamma;
  j["weighting"] = to_string(e.weighting);
  j["workers"] = e.workers;
  j["target_loss"] = e.target_loss ? json(*e.target_loss) : json();
  j["timing"] = e.timing;
  return j;
}

}  // namespace

json model_spec_to_json(const ModelSpec& s) {
  return {{"family", to_string(s.family)}, {"input_dim", s.input_dim},   {"output_dim", s.output_dim},
          {"hidden", s.hidden_dims},       {"loss", to_string(s.loss)}, {"bias", s.bias}};
}

ModelSpec model_spec_from_json(const json& j, const std::string& path) {
  Reader r(j, path);
  ModelSpec s;
  try {
    s.family = parse_family(r.text("family", ""));
  } catch (const std::exception& e) {
    throw ConfigError(r.at("family"), e.what());
  }
  s.input_dim = r.integer("input_dim", 0);
  s.output_dim = r.integer("output_dim", 1);
  s.hidden_dims = r.integers("hidden", {});
  const std::string default_loss = s.family == ModelFamily::Logistic ? "cross_entropy" : "squared_error";
  try {
    s.loss = parse_loss(r.text("loss", default_loss));
  } catch (const std::exception& e) {
    throw ConfigError(r.at("loss"), e.what());
  }
  s.bias = r.boolean("bias", true);
  r.finish();
  try {
    s.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(path + (e.path().empty() ? "" : "." + e.path()), e.what());
  }
  return s;
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  Reader r(j, "");
  ExperimentConfig c;
  const json& version = r.raw("schema_version");
  if (!version.is_number_integer() || version.get<int>() != kSchemaVersion) {
    throw ConfigError("schema_version", "expected " + std::to_string(kSchemaVersion));
  }
  c.seed = r.seed("seed", 0);
  c.dataset = parse_dataset(r.raw("dataset"));

  const json model = r.raw_or_null("model");
  if (!model.is_null()) c.model = model_spec_from_json(model, "model");

  {
    Reader s(r.raw("strategy"), "strategy");
    c.strategy.name = s.text("name", "");
    if (c.strategy.name.empty()) throw ConfigError("strategy.name", "missing");
    c.strategy.params = resolve_params(c.strategy.name, s.raw_or_null("params"));
    s.finish();
    make_strategy(c.strategy.name, c.strategy.params);  // surfaces range errors before any compute
  }

  const json engine = r.raw_or_null("engine");
  c.engine = parse_engine(engine.is_null() ? json::object() : engine);
  c.engine.seed = c.seed;

  const json output = r.raw_or_null("output");
  if (!output.is_null()) {
    Reader o(output, "output");
    c.output.dir = o.text("dir", c.output.dir);
    c.output.curves = o.boolean("curves", c.output.curves);
    o.finish();
  }
  r.finish();
  return c;
}

json ExperimentConfig::to_json() const {
  json d = dataset.options;
  d["kind"] = dataset.kind;
  if (dataset.seed) d["seed"] = *dataset.seed;
  json j;
  j["schema_version"] = schema_version;
  j["seed"] = seed;
  j["dataset"] = d;
  j["model"] = model ? model_spec_to_json(*model) : json();
  j["strategy"] = {{"name", strategy.name}, {"params", strategy.params}};
  j["engine"] = engine_to_json(engine);
  j["output"] = {{"dir", output.dir}, {"curves", output.curves}};
  return j;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::ios_base::failure("cannot open config '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("$", std::string("invalid JSON: ") + e.what());
  }
  return ExperimentConfig::from_json(j);
}

void apply_override(json& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("--set", "expected key=value, got '" + assignment + "'");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::parse_error&) {
    value = text;
  }
  json* node = &config;
  std::stringstream ss(key);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) {
    if (part.empty()) throw ConfigError(key, "empty path component");
    parts.push_back(part);
  }
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    if (node->is_null()) *node = json::object();
    if (!node->is_object()) throw ConfigError(key, "'" + parts[i] + "' is not an object");
    node = &(*node)[parts[i]];
  }
  if (node->is_null()) *node = json::object();
  if (!node->is_object()) throw ConfigError(key, "parent is not an object");
  (*node)[parts.back()] = value;
}

json config_schema() {
  const json number = {{"type", "number"}};
  const json integer = {{"type", "integer"}};
  const json numbers = {{"type", "array"}, {"items", number}};
  const json integers = {{"type", "array"}, {"items", integer}};
  const json nullable_numbers = {{"type", json::array({"array", "null"})}, {"items", number}};
  auto object = [](json props, json required = json::array()) {
    return json{{"type", "object"}, {"properties", std::move(props)}, {"required", std::move(required)},
                {"additionalProperties", false}};
  };
  auto kind = [&](const std::string& name, json props, json required = json::array()) {
    props["kind"] = {{"const", name}};
    props["seed"] = {{"type", "integer"}, {"minimum", 0}};
    required.push_back("kind");
    return object(std::move(props), std::move(required));
  };
  json datasets = json::array({
      kind("quadratic", {{"curvatures", numbers}, {"optima", numbers}, {"points_per_client", integer}}),
      kind("sine", {{"clients", integer},
                    {"points_per_client", integer},
                    {"test_points", integer},
                    {"noise_sd", number},
                    {"hidden", integers},
                    {"phases", nullable_numbers}}),
      kind("label_skew", {{"clients", integer},
                          {"classes", integer},
                          {"alpha", number},
                          {"total_points", integer},
                          {"test_points", integer},
                          {"input_dim", integer},
                          {"class_separation", number}}),
      kind("concept_shift", {{"clients", integer},
                             {"clusters", integer},
                             {"input_dim", integer},
                             {"points_per_client", integer},
                             {"test_points", integer},
                             {"noise_sd", number},
                             {"truth_scale", number},
                             {"truths", {{"type", json::array({"array", "null"})}, {"items", numbers}}}}),
      kind("csv",
           {{"path", {{"type", "string"}}},
            {"partition_column", {{"type", "string"}}},
            {"target_column", {{"type", json::array({"string", "null"})}}},
            {"group_column", {{"type", json::array({"string", "null"})}}},
            {"classification", {{"type", "boolean"}}},
            {"test_fraction", number}},
           json::array({"path", "partition_column"})),
  });
  json model = object({{"family", {{"enum", json::array({"linear", "logistic", "mlp"})}}},
                       {"input_dim", integer},
                       {"output_dim", integer},
                       {"hidden", integers},
                       {"loss", {{"enum", json::array({"squared_error", "cross_entropy"})}}},
                       {"bias", {{"type", "boolean"}}}},
                      json::array({"family", "input_dim"}));
  model["type"] = json::array({"object", "null"});
  json engine = object({{"rounds", integer},
                        {"local_epochs", integer},
                        {"client_epochs", integers},
                        {"batch_size", {{"anyOf", json::array({integer, {{"const", "full"}}, {{"type", "null"}}})}}},
                        {"lr_local", number},
                        {"lr_server", number},
                        {"sample_fraction", number},
                        {"sampling", {{"enum", json::array({"uniform", "size", "grad_norm", "loss"})}}},
                        {"sampling_gamma", number},
                        {"weighting", {{"enum", json::array({"auto", "size", "equal"})}}},
                        {"workers", integer},
                        {"target_loss", {{"type", json::array({"number", "null"})}}},
                        {"timing", {{"type", "boolean"}}}});
  json strategy = object({{"name", {{"enum", strategy_names()}}}, {"params", {{"type", json::array({"object", "null"})}}}},
                         json::array({"name"}));
  json output = object({{"dir", {{"type", "string"}}}, {"curves", {{"type", "boolean"}}}});
  json root = object({{"schema_version", {{"const", kSchemaVersion}}},
                      {"seed", {{"type", "integer"}, {"minimum", 0}}},
                      {"dataset", {{"oneOf", datasets}}},
                      {"model", model},
                      {"strategy", strategy},
                      {"engine", engine},
                      {"output", output}},
                     json::array({"schema_version", "dataset", "strategy"}));
  root["$schema"] = "https://json-schema.org/draft/2020-12/schema";
  root["title"] = "fedsim experiment config";
  return root;
}

}  // namespace fedsim
