#include "fedsim/datagen.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>

#include "fedsim/errors.hpp"
#include "fedsim/rng.hpp"

namespace fedsim {

std::vector<double> FederatedDataset::sizes() const {
  std::vector<double> n;
  n.reserve(clients.size());
  for (const auto& c : clients) n.push_back(static_cast<double>(c.n()));
  return n;
}

void FederatedDataset::validate() const {
  if (clients.empty()) throw DomainError("dataset has no clients");
  for (std::size_t i = 0; i < clients.size(); ++i) {
    const auto& c = clients[i];
    if (c.client_id != static_cast<int>(i)) throw StructuralError("client ids must be 0..N-1 in order");
    if (c.train.empty()) throw DomainError("client " + std::to_string(i) + " has no training data");
    if (c.group < 0 || c.group >= groups) throw DomainError("client " + std::to_string(i) + " group out of range");
    if (c.train.input_dim() != spec.input_dim || c.train.target_dim() != spec.target_dim()) {
      throw StructuralError("client " + std::to_string(i) + " data does not match the model dimensions");
    }
  }
}

namespace {

// Splits `total` into integer counts proportional to `shares` (largest remainder).
std::vector<int> apportion(const std::vector<double>& shares, int total) {
  std::vector<int> counts(shares.size(), 0);
  std::vector<std::pair<double, std::size_t>> rem;
  int assigned = 0;
  for (std::size_t k = 0; k < shares.size(); ++k) {
    const double exact = shares[k] * total;
    counts[k] = static_cast<int>(std::floor(exact));
    assigned += counts[k];
    rem.emplace_back(exact - counts[k], k);
  }
  std::stable_sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t j = 0; assigned < total; ++j, ++assigned) counts[rem[j % rem.size()].second] += 1;
  return counts;
}

std::vector<double> dirichlet(double alpha, int k, RngStream& rng) {
  std::gamma_distribution<double> gamma(alpha, 1.0);
  std::vector<double> p(static_cast<std::size_t>(k));
  double s = 0.0;
  for (auto& v : p) s += (v = gamma(rng));
  if (s <= 0.0) {
    std::fill(p.begin(), p.end(), 0.0);
    p[rng.index(static_cast<std::uint64_t>(k))] = 1.0;
    return p;
  }
  for (auto& v : p) v /= s;
  return p;
}

}  // namespace

FederatedDataset gen_quadratic_clients(const std::vector<double>& curvatures, const std::vector<double>& optima,
                                       int points_per_client) {
  if (curvatures.size() != optima.size() || curvatures.empty()) {
    throw StructuralError("curvatures and optima must be non-empty and of equal length");
  }
  if (points_per_client < 1) throw DomainError("points_per_client must be >= 1");
  FederatedDataset ds;
  ds.spec = ModelSpec::linear(1, 1, /*bias=*/false);
  ds.groups = static_cast<int>(curvatures.size());
  for (std::size_t i = 0; i < curvatures.size(); ++i) {
    const double h = curvatures[i];
    if (!(h > 0.0)) throw DomainError("curvature must be positive");
    const double x = std::sqrt(h);
    std::vector<double> xs(static_cast<std::size_t>(points_per_client), x);
    std::vector<double> ys(static_cast<std::size_t>(points_per_client), x * optima[i]);
    ClientDataset c;
    c.client_id = static_cast<int>(i);
    c.group = static_cast<int>(i);
    c.train = Batch(1, 1, xs, ys);
    c.test = Batch(1, 1, xs, ys);
    c.truth.curvature = h;
    c.truth.optimum = optima[i];
    ds.clients.push_back(std::move(c));
  }
  return ds;
}

FederatedDataset gen_sine_clients(const SineOptions& opt) {
  if (opt.clients < 1) throw DomainError("sine generator needs at least one client");
  if (opt.points_per_client < 1) throw DomainError("points_per_client must be >= 1");
  if (opt.phases && opt.phases->size() != static_cast<std::size_t>(opt.clients)) {
    throw StructuralError("one phase per client required");
  }
  FederatedDataset ds;
  ds.spec = ModelSpec::mlp(1, opt.hidden, 1);
  ds.groups = 1;
  for (int i = 0; i < opt.clients; ++i) {
    RngStream rng = rng_substream(opt.seed, "data:sine", 0, i);
    const double theta = opt.phases ? (*opt.phases)[static_cast<std::size_t>(i)] : rng.uniform();
    auto draw = [&](int n) {
      std::vector<double> xs;
      std::vector<double> ys;
      for (int k = 0; k < n; ++k) {
        const double x = rng.uniform();
        double y = std::sin(2.0 * std::numbers::pi * (x + theta));
        if (opt.noise_sd > 0.0) y += opt.noise_sd * rng.normal();
        xs.push_back(x);
        ys.push_back(y);
      }
      return std::pair{xs, ys};
    };
    auto [xtr, ytr] = draw(opt.points_per_client);
    auto [xte, yte] = draw(opt.test_points);
    ClientDataset c;
    c.client_id = i;
    c.train = Batch(1, 1, std::move(xtr), std::move(ytr));
    c.test = opt.test_points > 0 ? Batch(1, 1, std::move(xte), std::move(yte)) : Batch();
    c.truth.phase = theta;
    ds.clients.push_back(std::move(c));
  }
  return ds;
}

FederatedDataset gen_label_skew_classification(const LabelSkewOptions& opt) {
  if (!(opt.alpha > 0.0)) throw DomainError("dirichlet alpha must be positive");
  if (opt.classes < 2) throw DomainError("need at least two classes");
  if (opt.clients < 1) throw DomainError("need at least one client");
  if (opt.total_points < opt.clients) {
    throw DomainError("cannot give every client an example: total_points < clients");
  }
  const int d = opt.input_dim;
  RngStream mean_rng = rng_substream(opt.seed, "data:label_skew:means", 0, 0);
  std::vector<std::vector<double>> means(static_cast<std::size_t>(opt.classes), std::vector<double>(static_cast<std::size_t>(d)));
  for (auto& m : means) {
    double nrm = 0.0;
    for (auto& v : m) {
      v = mean_rng.normal();
      nrm += v * v;
    }
    nrm = std::sqrt(nrm);
    for (auto& v : m) v *= opt.class_separation / (nrm > 0 ? nrm : 1.0);
  }

  FederatedDataset ds;
  ds.spec = ModelSpec::logistic(d, opt.classes);
  ds.groups = 1;
  const std::vector<int> per_client =
      apportion(std::vector<double>(static_cast<std::size_t>(opt.clients), 1.0 / opt.clients), opt.total_points);
  for (int i = 0; i < opt.clients; ++i) {
    RngStream rng = rng_substream(opt.seed, "data:label_skew", 0, i);
    const auto shares = dirichlet(opt.alpha, opt.classes, rng);
    auto draw = [&](int n) {
      const auto counts = apportion(shares, n);
      std::vector<double> xs;
      std::vector<double> ys;
      for (int k = 0; k < opt.classes; ++k) {
        for (int r = 0; r < counts[static_cast<std::size_t>(k)]; ++r) {
          for (int j = 0; j < d; ++j) xs.push_back(means[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)] + rng.normal());
          ys.push_back(k);
        }
      }
      return std::pair{xs, ys};
    };
    auto [xtr, ytr] = draw(per_client[static_cast<std::size_t>(i)]);
    ClientDataset c;
    c.client_id = i;
    c.train = Batch(d, 1, std::move(xtr), std::move(ytr));
    if (opt.test_points > 0) {
      auto [xte, yte] = draw(opt.test_points);
      c.test = Batch(d, 1, std::move(xte), std::move(yte));
    }
    c.truth.class_proportions = shares;
    ds.clients.push_back(std::move(c));
  }
  return ds;
}

FederatedDataset gen_concept_shift_regression(const ConceptShiftOptions& opt) {
  if (opt.clusters < 1 || opt.clusters > opt.clients) throw DomainError("cluster count must be in [1, clients]");
  if (opt.points_per_client < 1) throw DomainError("points_per_client must be >= 1");
  const int d = opt.input_dim;
  std::vector<std::vector<double>> truths;
  if (opt.truths) {
    truths = *opt.truths;
    if (truths.size() != static_cast<std::size_t>(opt.clusters)) throw StructuralError("one truth per cluster required");
    for (const auto& t : truths) {
      if (t.size() != static_cast<std::size_t>(d)) throw StructuralError("truth dimension must equal input_dim");
    }
  } else {
    RngStream rng = rng_substream(opt.seed, "data:concept_shift:truths", 0, 0);
    for (int g = 0; g < opt.clusters; ++g) {
      std::vector<double> t(static_cast<std::size_t>(d));
      for (auto& v : t) v = opt.truth_scale * rng.normal();
      truths.push_back(std::move(t));
    }
  }
  FederatedDataset ds;
  ds.spec = ModelSpec::linear(d, 1, true);
  ds.groups = opt.clusters;
  for (int i = 0; i < opt.clients; ++i) {
    const int g = i % opt.clusters;
    const auto& theta = truths[static_cast<std::size_t>(g)];
    RngStream rng = rng_substream(opt.seed, "data:concept_shift", 0, i);
    auto draw = [&](int n) {
      std::vector<double> xs;
      std::vector<double> ys;
      for (int k = 0; k < n; ++k) {
        double y = 0.0;
        for (int j = 0; j < d; ++j) {
          const double x = rng.normal();
          xs.push_back(x);
          y += theta[static_cast<std::size_t>(j)] * x;
        }
        if (opt.noise_sd > 0.0) y += opt.noise_sd * rng.normal();
        ys.push_back(y);
      }
      return std::pair{xs, ys};
    };
    auto [xtr, ytr] = draw(opt.points_per_client);
    ClientDataset c;
    c.client_id = i;
    c.group = g;
    c.train = Batch(d, 1, std::move(xtr), std::move(ytr));
    if (opt.test_points > 0) {
      auto [xte, yte] = draw(opt.test_points);
      c.test = Batch(d, 1, std::move(xte), std::move(yte));
    }
    c.truth.coefficients = theta;
    ds.clients.push_back(std::move(c));
  }
  return ds;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      cells.push_back(std::move(cur));
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  cells.push_back(std::move(cur));
  return cells;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

double parse_number(const std::string& raw, std::size_t row, std::size_t col) {
  const std::string s = trim(raw);
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (!s.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (s.empty() || ec != std::errc() || ptr != last || !std::isfinite(v)) {
    throw ParseError(row, col, "non-numeric value '" + s + "'");
  }
  return v;
}

}  // namespace

FederatedDataset load_csv_partition(const std::string& path, const CsvOptions& opt) {
  std::ifstream in(path);
  if (!in) throw std::ios_base::failure("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw ParseError(1, 1, "missing header row");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  std::vector<std::string> header = split_csv_line(line);
  for (auto& h : header) h = trim(h);

  auto column = [&](const std::string& name, const char* role) -> std::size_t {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ParseError(1, 1, std::string(role) + " column '" + name + "' not in header");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t part_col = column(opt.partition_column, "partition");
  std::optional<std::size_t> group_col;
  if (opt.group_column) group_col = column(*opt.group_column, "group");
  std::size_t target_col = 0;
  if (opt.target_column) {
    target_col = column(*opt.target_column, "target");
  } else {
    bool found = false;
    for (std::size_t c = header.size(); c-- > 0;) {
      if (c != part_col && (!group_col || c != *group_col)) {
        target_col = c;
        found = true;
        break;
      }
    }
    if (!found) throw ParseError(1, 1, "no target column available");
  }
  std::vector<std::size_t> feature_cols;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (c != part_col && c != target_col && (!group_col || c != *group_col)) feature_cols.push_back(c);
  }
  if (feature_cols.empty()) throw ParseError(1, 1, "no feature columns");

  struct Rows {
    std::vector<double> x;
    std::vector<double> y;
    int group = 0;
  };
  std::map<std::string, Rows> parts;
  std::size_t row = 1;
  std::size_t total_rows = 0;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw ParseError(row, std::min(cells.size(), header.size()) + 1,
                       "expected " + std::to_string(header.size()) + " cells, found " + std::to_string(cells.size()));
    }
    const std::string key = trim(cells[part_col]);
    if (key.empty()) throw DomainError("empty partition value at row " + std::to_string(row));
    Rows& r = parts[key];
    for (std::size_t c : feature_cols) r.x.push_back(parse_number(cells[c], row, c + 1));
    const double y = parse_number(cells[target_col], row, target_col + 1);
    if (opt.classification && (y < 0 || y != std::floor(y))) {
      throw ParseError(row, target_col + 1, "class label must be a non-negative integer");
    }
    r.y.push_back(y);
    if (group_col) {
      const double g = parse_number(cells[*group_col], row, *group_col + 1);
      if (g < 0 || g != std::floor(g)) throw ParseError(row, *group_col + 1, "group must be a non-negative integer");
      r.group = static_cast<int>(g);
    }
    ++total_rows;
  }
  if (total_rows == 0) throw DomainError("csv has no data rows");

  const int d = static_cast<int>(feature_cols.size());
  FederatedDataset ds;
  int max_label = 0;
  int max_group = 0;
  int id = 0;
  for (auto& [key, rows] : parts) {
    const std::size_t n = rows.y.size();
    std::vector<std::size_t> order(n);
    for (std::size_t k = 0; k < n; ++k) order[k] = k;
    RngStream rng = rng_substream(opt.seed, "data:csv_split", 0, id);
    rng.shuffle(order);
    const std::size_t n_test = static_cast<std::size_t>(std::floor(opt.test_fraction * static_cast<double>(n)));
    const std::size_t n_train = n - n_test;
    if (n_train == 0) throw DomainError("partition '" + key + "' has no training rows");
    Batch all(d, 1, rows.x, rows.y);
    ClientDataset c;
    c.client_id = id++;
    c.group = rows.group;
    c.train = all.subset(std::span(order).first(n_train));
    if (n_test > 0) c.test = all.subset(std::span(order).subspan(n_train));
    for (double y : rows.y) max_label = std::max(max_label, static_cast<int>(y));
    max_group = std::max(max_group, rows.group);
    ds.clients.push_back(std::move(c));
  }
  ds.groups = max_group + 1;
  ds.spec = opt.classification ? ModelSpec::logistic(d, std::max(2, max_label + 1)) : ModelSpec::linear(d, 1, true);
  return ds;
}

}  // namespace fedsim
