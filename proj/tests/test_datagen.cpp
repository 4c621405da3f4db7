#include <doctest.h>

#include <cmath>
#include <fstream>
#include <set>

#include "fedsim/datagen.hpp"
#include "fedsim/errors.hpp"
#include "helpers.hpp"

using namespace fedsim;

namespace {

ParamVector scalar(const ModelSpec& spec, double w) { return ParamVector(spec.layout(), {w}); }

bool all_finite(const Batch& b) {
  for (double v : b.inputs())
    if (!std::isfinite(v)) return false;
  for (double v : b.targets())
    if (!std::isfinite(v)) return false;
  return true;
}

bool same_dataset(const FederatedDataset& a, const FederatedDataset& b) {
  if (a.size() != b.size() || !(a.spec == b.spec) || a.groups != b.groups) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!(a.clients[i].train == b.clients[i].train) || !(a.clients[i].test == b.clients[i].test)) return false;
    if (a.clients[i].group != b.clients[i].group) return false;
  }
  return true;
}

std::string data_file(const char* name) { return std::string(FEDSIM_TEST_DATA_DIR) + "/" + name; }

}  // namespace

TEST_SUITE("datagen") {
  TEST_CASE("quadratic clients realise h (w - a)^2 / 2") {
    const auto ds = gen_quadratic_clients({1.0, 3.0}, {0.0, 1.0}, 3);
    CHECK(ds.size() == 2);
    CHECK(ds.spec.param_count() == 1);
    for (double w : {-1.3, 0.0, 0.4, 0.75, 2.0}) {
      for (std::size_t i = 0; i < 2; ++i) {
        const double h = *ds.clients[i].truth.curvature;
        const double a = *ds.clients[i].truth.optimum;
        CHECK(std::abs(loss(ds.spec, scalar(ds.spec, w), ds.clients[i].train) - h * (w - a) * (w - a) / 2) < 1e-12);
        CHECK(std::abs(gradient(ds.spec, scalar(ds.spec, w), ds.clients[i].train)[0] - h * (w - a)) < 1e-12);
      }
    }
  }

  TEST_CASE("quadratic global optima") {
    // Minimiser of the mean loss: sum h_i a_i / sum h_i, found here by Newton on the realised data.
    auto optimum = [](std::vector<double> h, std::vector<double> a) {
      const auto ds = gen_quadratic_clients(h, a);
      double g = 0.0, hess = 0.0;
      for (const auto& c : ds.clients) {
        g += gradient(ds.spec, scalar(ds.spec, 0.0), c.train)[0];
        hess += hvp(ds.spec, scalar(ds.spec, 0.0), c.train, scalar(ds.spec, 1.0))[0];
      }
      return -g / hess;
    };
    CHECK(optimum({1, 1}, {0, 2}) == doctest::Approx(1.0));
    CHECK(optimum({1, 3}, {0, 1}) == doctest::Approx(0.75));
  }

  TEST_CASE("quadratic errors") {
    CHECK_THROWS_AS(gen_quadratic_clients({1.0, 0.0}, {0.0, 1.0}), DomainError);
    CHECK_THROWS_AS(gen_quadratic_clients({1.0, -2.0}, {0.0, 1.0}), DomainError);
    CHECK_THROWS(gen_quadratic_clients({1.0}, {0.0, 1.0}));
  }

  TEST_CASE("sine clients") {
    SineOptions o;
    o.clients = 4;
    o.test_points = 4000;
    o.seed = 3;
    const auto ds = gen_sine_clients(o);
    CHECK(ds.size() == 4);
    CHECK(ds.spec.family == ModelFamily::Mlp);
    for (const auto& c : ds.clients) {
      REQUIRE(c.truth.phase.has_value());
      CHECK(*c.truth.phase >= 0.0);
      CHECK(*c.truth.phase < 1.0);
      CHECK(c.n() == 20);
      CHECK(all_finite(c.train));
      // zero predictor: E[sin^2]/2 = 1/4
      double s = 0.0;
      for (double y : c.test.targets()) s += 0.5 * y * y;
      CHECK(s / static_cast<double>(c.test.size()) == doctest::Approx(0.25).epsilon(0.04));
      for (std::size_t k = 0; k < c.train.size(); ++k) {
        const double x = c.train.x(k)[0];
        CHECK(c.train.y(k)[0] == doctest::Approx(std::sin(2 * M_PI * (x + *c.truth.phase))).epsilon(1e-12));
      }
    }
  }

  TEST_CASE("sine with zero phases gives identical client distributions") {
    SineOptions o;
    o.clients = 3;
    o.phases = std::vector<double>{0.0, 0.0, 0.0};
    const auto ds = gen_sine_clients(o);
    for (const auto& c : ds.clients) {
      for (std::size_t k = 0; k < c.train.size(); ++k) {
        CHECK(c.train.y(k)[0] == doctest::Approx(std::sin(2 * M_PI * c.train.x(k)[0])).epsilon(1e-12));
      }
    }
  }

  TEST_CASE("label skew: near-uniform shares at large alpha") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      LabelSkewOptions o;
      o.alpha = 1000.0;
      o.seed = seed;
      const auto ds = gen_label_skew_classification(o);
      double worst = 0.0;
      for (const auto& c : ds.clients) {
        REQUIRE(c.truth.class_proportions.size() == 3);
        for (double p : c.truth.class_proportions) worst = std::max(worst, std::abs(p - 1.0 / 3.0));
      }
      CHECK(worst < 0.1);
    }
  }

  TEST_CASE("label skew: strong skew at small alpha") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      LabelSkewOptions o;
      o.alpha = 0.1;
      o.seed = seed;
      const auto ds = gen_label_skew_classification(o);
      bool skewed = false;
      for (const auto& c : ds.clients) {
        std::vector<double> counts(3, 0.0);
        for (double y : c.train.targets()) counts[static_cast<std::size_t>(y)] += 1.0;
        const double top = *std::max_element(counts.begin(), counts.end());
        skewed = skewed || top / static_cast<double>(c.n()) > 0.8;
      }
      CHECK(skewed);
    }
  }

  TEST_CASE("label skew: feasibility and shapes") {
    LabelSkewOptions o;
    o.clients = 25;
    o.total_points = 30;
    o.alpha = 0.05;
    const auto ds = gen_label_skew_classification(o);
    for (const auto& c : ds.clients) CHECK(c.n() >= 1);
    CHECK(ds.spec.output_dim == 3);
    CHECK(ds.spec.classification());
    o.clients = 40;
    CHECK_THROWS_AS(gen_label_skew_classification(o), DomainError);
    o.clients = 5;
    o.alpha = 0.0;
    CHECK_THROWS_AS(gen_label_skew_classification(o), DomainError);
  }

  TEST_CASE("concept shift clusters") {
    ConceptShiftOptions o;
    o.clients = 6;
    o.clusters = 1;
    auto ds = gen_concept_shift_regression(o);
    for (const auto& c : ds.clients) {
      CHECK(c.group == 0);
      CHECK(c.truth.coefficients == ds.clients[0].truth.coefficients);
    }

    o.clusters = 2;
    o.truths = std::vector<std::vector<double>>{{1.0}, {-1.0}};
    ds = gen_concept_shift_regression(o);
    CHECK(ds.groups == 2);
    // per-cluster least squares through the origin: sum xy / sum x^2
    for (int g = 0; g < 2; ++g) {
      double sxy = 0.0, sxx = 0.0;
      for (const auto& c : ds.clients) {
        if (c.group != g) continue;
        CHECK(c.client_id % 2 == g);
        for (std::size_t k = 0; k < c.train.size(); ++k) {
          sxy += c.train.x(k)[0] * c.train.y(k)[0];
          sxx += c.train.x(k)[0] * c.train.x(k)[0];
        }
      }
      CHECK(sxy / sxx == doctest::Approx(g == 0 ? 1.0 : -1.0));
    }

    o.truths.reset();
    o.clusters = 6;
    ds = gen_concept_shift_regression(o);
    std::set<std::vector<double>> distinct;
    for (const auto& c : ds.clients) distinct.insert(c.truth.coefficients);
    CHECK(distinct.size() == 6);

    o.clusters = 7;
    CHECK_THROWS_AS(gen_concept_shift_regression(o), DomainError);
  }

  TEST_CASE("generators are deterministic per seed") {
    SineOptions s;
    s.clients = 5;
    s.seed = 42;
    CHECK(same_dataset(gen_sine_clients(s), gen_sine_clients(s)));
    s.seed = 43;
    const auto other = gen_sine_clients(s);
    s.seed = 42;
    CHECK_FALSE(same_dataset(gen_sine_clients(s), other));

    LabelSkewOptions l;
    l.seed = 7;
    CHECK(same_dataset(gen_label_skew_classification(l), gen_label_skew_classification(l)));
    ConceptShiftOptions c;
    c.seed = 7;
    c.noise_sd = 0.1;
    CHECK(same_dataset(gen_concept_shift_regression(c), gen_concept_shift_regression(c)));
  }

  TEST_CASE("synthetic test sets are drawn separately from train") {
    LabelSkewOptions l;
    const auto ds = gen_label_skew_classification(l);
    for (const auto& c : ds.clients) {
      std::set<std::vector<double>> train_rows;
      for (std::size_t k = 0; k < c.train.size(); ++k) train_rows.insert({c.train.x(k).begin(), c.train.x(k).end()});
      for (std::size_t k = 0; k < c.test.size(); ++k) {
        CHECK(train_rows.count({c.test.x(k).begin(), c.test.x(k).end()}) == 0);
      }
      CHECK(all_finite(c.train));
      CHECK(all_finite(c.test));
    }
  }

  TEST_CASE("csv partitions") {
    CsvOptions o;
    o.partition_column = "site";
    const auto ds = load_csv_partition(data_file("two_parts.csv"), o);
    CHECK(ds.size() == 2);
    CHECK(ds.spec.input_dim == 2);
    std::size_t rows = 0;
    for (const auto& c : ds.clients) rows += c.train.size() + c.test.size();
    CHECK(rows == 11);
    CHECK(ds.clients[0].test.size() == 1);  // floor(0.2 * 5)
    CHECK(ds.clients[1].test.size() == 1);  // floor(0.2 * 6)
    CHECK(same_dataset(ds, load_csv_partition(data_file("two_parts.csv"), o)));
  }

  TEST_CASE("csv classification with a group column") {
    CsvOptions o;
    o.partition_column = "site";
    o.group_column = "group";
    o.classification = true;
    o.test_fraction = 0.0;
    const auto ds = load_csv_partition(data_file("classes.csv"), o);
    CHECK(ds.size() == 2);
    CHECK(ds.groups == 2);
    CHECK(ds.clients[1].group == 1);
    CHECK(ds.spec.output_dim == 3);
  }

  TEST_CASE("csv errors") {
    CsvOptions o;
    o.partition_column = "site";
    try {
      load_csv_partition(data_file("bad_cell.csv"), o);
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.row() == 3);
      CHECK(e.col() == 2);
    }
    CHECK_THROWS_AS(load_csv_partition(data_file("missing.csv"), o), std::ios_base::failure);
    o.partition_column = "nope";
    CHECK_THROWS_AS(load_csv_partition(data_file("two_parts.csv"), o), ParseError);

    const std::string tmp = "fedsim_test_empty_part.csv";
    {
      std::ofstream f(tmp);
      f << "site,x,y\na,1,2\n,3,4\n";
    }
    o.partition_column = "site";
    CHECK_THROWS_AS(load_csv_partition(tmp, o), DomainError);
    {
      std::ofstream f(tmp);
      f << "site,x,y\na,1\n";
    }
    CHECK_THROWS_AS(load_csv_partition(tmp, o), ParseError);
    std::remove(tmp.c_str());
  }
}
