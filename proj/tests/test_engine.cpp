#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <numeric>
#include <set>

#include "fedsim/datagen.hpp"
#include "fedsim/engine.hpp"
#include "fedsim/errors.hpp"
#include "helpers.hpp"

using namespace fedsim;
using namespace fedsim::test;

namespace {

FederatedDataset small_concept(int clients = 6, int dim = 2, std::uint64_t seed = 1) {
  ConceptShiftOptions o;
  o.clients = clients;
  o.input_dim = dim;
  o.noise_sd = 0.1;
  o.seed = seed;
  return gen_concept_shift_regression(o);
}

}  // namespace

TEST_SUITE("engine") {
  TEST_CASE("round count") {
    const auto data = gen_quadratic_clients({1, 3}, {0, 1});
    EngineConfig c;
    c.rounds = 1;
    CHECK(run("fedavg", {}, c, data).records.size() == 1);
    c.rounds = 0;
    CHECK_THROWS_AS(run("fedavg", {}, c, data), ConfigError);
    c.rounds = 7;
    const auto r = run("fedavg", {}, c, data);
    REQUIRE(r.records.size() == 7);
    for (int t = 0; t < 7; ++t) CHECK(r.records[static_cast<std::size_t>(t)].round == t + 1);
  }

  TEST_CASE("config validation paths") {
    EngineConfig c;
    c.local_epochs = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = EngineConfig{};
    c.sample_fraction = 1.5;
    try {
      c.validate();
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(e.path() == "engine.sample_fraction");
    }
    c = EngineConfig{};
    c.lr_local = 0.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
  }

  TEST_CASE("FedAvg with E=1 and full batch is centralized gradient descent") {
    const auto data = small_concept(6, 3);
    EngineConfig c;
    c.rounds = 20;
    c.lr_local = 0.05;
    c.seed = 5;
    for (auto weighting : {Weighting::Equal, Weighting::Size, Weighting::Auto}) {
      c.weighting = weighting;
      const auto w = server_w(run("fedavg", {}, c, data));
      CHECK(max_abs_diff(w, centralized_gd(data, c, 20)) < 1e-12);
    }
  }

  TEST_CASE("identical config gives byte-identical metrics across worker counts") {
    SineOptions s;
    s.clients = 8;
    s.hidden = {6};
    const auto data = gen_sine_clients(s);
    EngineConfig c;
    c.rounds = 4;
    c.batch_size = 5;
    c.sample_fraction = 0.5;
    c.lr_local = 0.05;
    c.seed = 9;
    const std::string a = jsonl(run("scaffold", {}, c, data));
    CHECK(a == jsonl(run("scaffold", {}, c, data)));
    c.workers = 4;
    CHECK(a == jsonl(run("scaffold", {}, c, data)));
    c.workers = 1;
    c.seed = 10;
    CHECK(a != jsonl(run("scaffold", {}, c, data)));
  }

  TEST_CASE("sampling probabilities") {
    const std::vector<double> sizes{10, 30};
    const std::vector<double> none;
    const auto p = sampling_probs(SamplingScheme::Size, sizes, none, 1.0);
    CHECK(p[0] == doctest::Approx(0.25));
    CHECK(p[1] == doctest::Approx(0.75));
    const std::vector<double> stats{0.0, std::log(2.0)};
    const auto q = adaptive_sampling_probs(stats, 1.0);
    CHECK(q[0] == doctest::Approx(1.0 / 3.0));
    CHECK(q[1] == doctest::Approx(2.0 / 3.0));
    const auto u = adaptive_sampling_probs(stats, 0.0);
    CHECK(u[0] == doctest::Approx(0.5));
    const std::vector<double> uniform_sizes{1, 1, 1, 1};
    const auto fallback = sampling_probs(SamplingScheme::Loss, uniform_sizes, none, 1.0);
    for (double x : fallback) CHECK(x == doctest::Approx(0.25));

    // sums to one and permutes with its input
    const std::vector<double> s1{0.3, 2.0, -1.0, 0.7};
    const std::vector<double> s2{2.0, 0.7, 0.3, -1.0};
    const auto p1 = adaptive_sampling_probs(s1, 1.7);
    const auto p2 = adaptive_sampling_probs(s2, 1.7);
    CHECK(std::accumulate(p1.begin(), p1.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(p1[1] == doctest::Approx(p2[0]).epsilon(1e-14));
    CHECK(p1[3] == doctest::Approx(p2[1]).epsilon(1e-14));
    CHECK(p1[0] == doctest::Approx(p2[2]).epsilon(1e-14));
    CHECK(p1[2] == doctest::Approx(p2[3]).epsilon(1e-14));
  }

  TEST_CASE("client selection") {
    const std::vector<double> sizes(10, 1.0);
    const std::vector<double> none;
    RngStream rng(1);
    const auto all = select_clients(SamplingScheme::Uniform, sizes, none, 1.0, 1.0, rng);
    CHECK(all.size() == 10);
    for (int i = 0; i < 10; ++i) CHECK(all[static_cast<std::size_t>(i)] == i);

    for (double f : {0.1, 0.25, 0.5, 0.91}) {
      RngStream a(7), b(7);
      const auto s = select_clients(SamplingScheme::Uniform, sizes, none, f, 1.0, a);
      CHECK(s.size() == static_cast<std::size_t>(std::ceil(f * 10 - 1e-9)));
      CHECK(std::is_sorted(s.begin(), s.end()));
      CHECK(std::set<int>(s.begin(), s.end()).size() == s.size());
      CHECK(s == select_clients(SamplingScheme::Uniform, sizes, none, f, 1.0, b));
    }

    // a client with overwhelming loss is always drawn first
    std::vector<double> loss(10, 0.0);
    loss[6] = 50.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      RngStream r(seed);
      const auto s = select_clients(SamplingScheme::Loss, sizes, loss, 0.1, 1.0, r);
      CHECK(s == std::vector<int>{6});
    }
  }

  TEST_CASE("size sampling draws proportionally") {
    const std::vector<double> sizes{10, 30};
    const std::vector<double> none;
    int second = 0;
    for (std::uint64_t seed = 0; seed < 4000; ++seed) {
      RngStream r(seed);
      second += select_clients(SamplingScheme::Size, sizes, none, 0.5, 1.0, r)[0] == 1;
    }
    CHECK(second / 4000.0 == doctest::Approx(0.75).epsilon(0.05));
  }

  TEST_CASE("rng substreams") {
    RngStream a = rng_substream(1, "client", 3, 4);
    RngStream b = rng_substream(1, "client", 3, 4);
    RngStream c = rng_substream(1, "client", 3, 5);
    bool differ = false;
    for (int k = 0; k < 100; ++k) {
      const auto x = a();
      CHECK(x == b());
      differ = differ || x != c();
    }
    CHECK(differ);
  }

  TEST_CASE("parallel draws match serial draws") {
    constexpr std::size_t n = 64;
    std::vector<std::vector<std::uint64_t>> serial(n), parallel(n);
    for (std::size_t i = 0; i < n; ++i) {
      RngStream r = rng_substream(2, "client", 1, static_cast<std::int64_t>(i));
      for (int k = 0; k < 50; ++k) serial[i].push_back(r());
    }
    WorkerPool pool(8);
    pool.parallel_for(n, [&](std::size_t i) {
      RngStream r = rng_substream(2, "client", 1, static_cast<std::int64_t>(i));
      for (int k = 0; k < 50; ++k) parallel[i].push_back(r());
    });
    CHECK(serial == parallel);
  }

  TEST_CASE("worker pool rethrows the lowest failing index") {
    WorkerPool pool(4);
    try {
      pool.parallel_for(100, [](std::size_t i) {
        if (i == 17 || i == 80) throw std::runtime_error("fail " + std::to_string(i));
      });
      FAIL("expected an exception");
    } catch (const std::runtime_error& e) {
      CHECK(std::string(e.what()) == "fail 17");
    }
    std::vector<int> hits(50, 0);
    pool.parallel_for(50, [&](std::size_t i) { hits[i] += 1; });
    CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
  }

  TEST_CASE("default worker count") {
    CHECK(default_workers(3) == 3);
    ::setenv("FEDSIM_WORKERS", "5", 1);
    CHECK(default_workers(std::nullopt) == 5);
    ::setenv("FEDSIM_WORKERS", "zero", 1);
    CHECK_THROWS_AS(default_workers(std::nullopt), ConfigError);
    ::unsetenv("FEDSIM_WORKERS");
    CHECK(default_workers(std::nullopt) == 1);
  }

  TEST_CASE("communication accounting") {
    const auto data = small_concept(10, 9);
    REQUIRE(data.spec.param_count() == 10);
    EngineConfig c;
    c.rounds = 3;
    c.sample_fraction = 0.5;
    const auto avg = run("fedavg", {}, c, data);
    const auto sc = run("scaffold", {}, c, data);
    for (std::size_t t = 0; t < 3; ++t) {
      CHECK(avg.records[t].selected.size() == 5);
      CHECK(avg.records[t].floats_uplink == 50);
      CHECK(avg.records[t].floats_downlink == 50);
      CHECK(sc.records[t].floats_uplink == 100);
    }
  }

  TEST_CASE("same local step budget: FedSGD pays five times the floats of FedAvg with E=5") {
    const auto data = small_concept(4, 2);
    EngineConfig sgd;
    sgd.rounds = 10;
    EngineConfig avg = sgd;
    avg.rounds = 2;
    avg.local_epochs = 5;
    auto total = [](const RunResult& r) {
      std::size_t s = 0;
      for (const auto& rec : r.records) s += rec.floats_uplink + rec.floats_downlink;
      return s;
    };
    CHECK(total(run("fedsgd", {}, sgd, data)) == 5 * total(run("fedavg", {}, avg, data)));
  }

  TEST_CASE("recorded variance is the variance of the recorded per-client metric") {
    LabelSkewOptions l;
    l.clients = 6;
    const auto data = gen_label_skew_classification(l);
    EngineConfig c;
    c.rounds = 3;
    c.batch_size = 16;
    const auto r = run("fedavg", {}, c, data);
    for (const auto& rec : r.records) {
      CHECK(rec.variance_metric == "test_loss");
      const double mean = std::accumulate(rec.test_loss.begin(), rec.test_loss.end(), 0.0) / 6.0;
      double var = 0.0;
      for (double x : rec.test_loss) var += (x - mean) * (x - mean);
      CHECK(rec.loss_variance == doctest::Approx(var / 6.0).epsilon(1e-12));
      CHECK(rec.test_accuracy.size() == 6);
    }
  }

  TEST_CASE("divergence reports the round") {
    const auto data = gen_quadratic_clients({1, 3}, {0, 1});
    EngineConfig c;
    c.rounds = 2000;
    c.lr_local = 1.5;  // 1 - 1.5 * 3 = -3.5: geometric blow-up
    try {
      run("fedavg", {}, c, data);
      FAIL("expected divergence");
    } catch (const DivergenceError& e) {
      CHECK(e.round() > 1);
      CHECK(e.round() < 2000);
    }
  }

  TEST_CASE("target loss stops early") {
    const auto data = gen_quadratic_clients({1, 3}, {0, 1});
    EngineConfig c = drift_config(500);
    c.target_loss = 0.19;
    const auto r = run("fedavg", {}, c, data);
    CHECK(r.records.size() < 500);
    CHECK(r.records.back().mean_test_loss <= 0.19);
    CHECK(r.records[r.records.size() - 2].mean_test_loss > 0.19);
  }

  TEST_CASE("batch stream epochs") {
    const Batch data(1, 1, {0, 1, 2, 3, 4, 5, 6}, {0, 1, 2, 3, 4, 5, 6});
    RngStream rng(3);
    BatchStream s(data, 3, rng);
    CHECK(s.batches_per_epoch() == 3);
    std::multiset<double> seen;
    for (int k = 0; k < 3; ++k) {
      const Batch b = s.next();
      for (double x : b.inputs()) seen.insert(x);
    }
    CHECK(seen == std::multiset<double>{0, 1, 2, 3, 4, 5, 6});
    RngStream rng2(3);
    BatchStream full(data, std::nullopt, rng2);
    CHECK(full.batches_per_epoch() == 1);
    CHECK(full.next() == data);
  }

  TEST_CASE("timing is recorded only on request") {
    const auto data = gen_quadratic_clients({1, 3}, {0, 1});
    EngineConfig c;
    c.rounds = 2;
    CHECK_FALSE(run("fedavg", {}, c, data).records[0].to_json().contains("wall_ms"));
    c.timing = true;
    CHECK(run("fedavg", {}, c, data).records[0].to_json().contains("wall_ms"));
  }
}
