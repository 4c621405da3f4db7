#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "fedsim/errors.hpp"
#include "fedsim/param.hpp"
#include "fedsim/rng.hpp"
#include "helpers.hpp"

using namespace fedsim;
using fedsim::test::vec;

TEST_SUITE("param") {
  TEST_CASE("weighted_average examples") {
    const std::vector<ParamVector> vs{vec({1, 2}), vec({3, 4})};
    const std::vector<double> equal{1, 1};
    CHECK(weighted_average(vs, equal).to_vector() == std::vector<double>{2, 3});
    const std::vector<double> skew{3, 1};
    CHECK(weighted_average(vs, skew).to_vector() == std::vector<double>{1.5, 2.5});
    const std::vector<ParamVector> one{vec({5, -1})};
    const std::vector<double> seven{7};
    CHECK(weighted_average(one, seven).to_vector() == std::vector<double>{5, -1});
  }

  TEST_CASE("weighted_average errors") {
    const std::vector<ParamVector> vs{vec({1, 2}), vec({3, 4})};
    const std::vector<double> zero{0, 0};
    CHECK_THROWS_AS(weighted_average(vs, zero), DomainError);
    const std::vector<ParamVector> mixed{vec({1, 2}), vec({1, 2, 3})};
    const std::vector<double> w{1, 1};
    CHECK_THROWS_AS(weighted_average(mixed, w), StructuralError);
  }

  TEST_CASE("weighted_average is permutation invariant and equal weights give the mean") {
    RngStream rng(11);
    std::vector<ParamVector> vs;
    std::vector<double> ws;
    for (int k = 0; k < 7; ++k) {
      std::vector<double> v(5);
      for (double& x : v) x = rng.normal();
      vs.push_back(vec(v));
      ws.push_back(rng.uniform(0.1, 2.0));
    }
    const auto ref = weighted_average(vs, ws).to_vector();
    std::vector<std::size_t> perm(vs.size());
    std::iota(perm.begin(), perm.end(), 0);
    for (int trial = 0; trial < 5; ++trial) {
      rng.shuffle(perm);
      std::vector<ParamVector> pv;
      std::vector<double> pw;
      for (auto i : perm) {
        pv.push_back(vs[i]);
        pw.push_back(ws[i]);
      }
      CHECK(fedsim::test::max_abs_diff(weighted_average(pv, pw).to_vector(), ref) < 1e-12);
    }
    const std::vector<double> ones(vs.size(), 1.0);
    const auto mean = weighted_average(vs, ones).to_vector();
    for (std::size_t j = 0; j < 5; ++j) {
      double s = 0.0;
      for (const auto& v : vs) s += v[j];
      CHECK(mean[j] == doctest::Approx(s / 7.0).epsilon(1e-14));
    }
  }

  TEST_CASE("cosine_similarity examples") {
    CHECK(cosine_similarity(vec({1, 0}), vec({0, 1})) == doctest::Approx(0.0));
    CHECK(cosine_similarity(vec({1, 2}), vec({2, 4})) == doctest::Approx(1.0));
    CHECK(cosine_similarity(vec({1, 0}), vec({-1, 0})) == doctest::Approx(-1.0));
    CHECK(cosine_similarity(vec({0.3, -2, 5}), vec({0.3, -2, 5})) == doctest::Approx(1.0));
    CHECK_THROWS_AS(cosine_similarity(vec({0, 0}), vec({1, 0})), DomainError);
  }

  TEST_CASE("non-finite values are rejected at construction") {
    CHECK_THROWS_AS(vec({1.0, std::numeric_limits<double>::quiet_NaN()}), NonFiniteError);
    CHECK_THROWS_AS(vec({std::numeric_limits<double>::infinity()}), NonFiniteError);
    CHECK_THROWS_AS(vec({1e308}).axpy(10.0, vec({1e308})), NonFiniteError);
  }

  TEST_CASE("layout invariants") {
    auto l = LayerLayout::from_sizes({{"layer0", 3}, {"layer1", 2}});
    CHECK(l->dim() == 5);
    CHECK(l->find("layer1").begin == 3);
    CHECK_THROWS_AS(l->index_of("layer9"), StructuralError);
    CHECK_THROWS_AS(LayerLayout({{"a", 0, 2}, {"b", 3, 4}}), StructuralError);
    CHECK_THROWS_AS(LayerLayout({{"a", 0, 2}, {"a", 2, 4}}), StructuralError);
    CHECK_THROWS_AS(ParamVector(l, {1, 2, 3}), StructuralError);
  }

  TEST_CASE("split and merge") {
    auto l = LayerLayout::from_sizes({{"layer0", 3}, {"layer1", 2}});
    const ParamVector v(l, {1, 2, 3, 4, 5});
    const ParamSplit s = split_params(v, "layer0");
    CHECK(s.base == std::vector<double>{1, 2, 3});
    CHECK(s.top == std::vector<double>{4, 5});
    CHECK(merge_params(s).to_vector() == v.to_vector());

    const ParamSplit last = split_params(v, "layer1");
    CHECK(last.top.empty());
    CHECK(last.base.size() == 5);
    CHECK(merge_params(last).to_vector() == v.to_vector());

    CHECK(split_params(v, "").base.empty());
    CHECK_THROWS_AS(split_params(v, "layer7"), StructuralError);
  }

  TEST_CASE("swapping bases between vectors") {
    auto l = LayerLayout::from_sizes({{"layer0", 4}, {"layer1", 3}, {"layer2", 2}});
    std::vector<double> a(9), b(9);
    std::iota(a.begin(), a.end(), 0.0);
    std::iota(b.begin(), b.end(), 100.0);
    const ParamVector va(l, a), vb(l, b);
    for (const std::string boundary : {"layer0", "layer1", "layer2"}) {
      ParamSplit sa = split_params(va, boundary);
      ParamSplit sb = split_params(vb, boundary);
      std::swap(sa.base, sb.base);
      const ParamVector ma = merge_params(sa);
      const ParamVector mb = merge_params(sb);
      const std::size_t cut = l->find(boundary).end;
      for (std::size_t i = 0; i < 9; ++i) {
        CHECK(ma[i] == (i < cut ? b[i] : a[i]));
        CHECK(mb[i] == (i < cut ? a[i] : b[i]));
      }
      CHECK(split_params(ma, boundary).base == split_params(vb, boundary).base);
    }
  }

  TEST_CASE("split/merge is a bijection on random layouts") {
    RngStream rng(3);
    for (int trial = 0; trial < 50; ++trial) {
      const int layers = 1 + static_cast<int>(rng.index(5));
      std::vector<std::pair<std::string, std::size_t>> sizes;
      for (int k = 0; k < layers; ++k) sizes.emplace_back("layer" + std::to_string(k), 1 + rng.index(6));
      auto l = LayerLayout::from_sizes(sizes);
      std::vector<double> v(l->dim());
      for (double& x : v) x = rng.normal();
      const ParamVector p(l, v);
      const std::string boundary = "layer" + std::to_string(rng.index(static_cast<std::uint64_t>(layers)));
      const ParamSplit s = split_params(p, boundary);
      CHECK(s.base.size() + s.top.size() == p.dim());
      CHECK(merge_params(s).to_vector() == v);
    }
  }

  TEST_CASE("vector algebra") {
    const ParamVector a = vec({1, 2, 3});
    const ParamVector b = vec({-1, 0, 2});
    CHECK((a + b).to_vector() == std::vector<double>{0, 2, 5});
    CHECK((a - b).to_vector() == std::vector<double>{2, 2, 1});
    CHECK((2.0 * a).to_vector() == std::vector<double>{2, 4, 6});
    CHECK(a.hadamard(b).to_vector() == std::vector<double>{-1, 0, 6});
    CHECK(a.dot(b) == 5.0);
    CHECK(a.squared_norm() == 14.0);
    CHECK_THROWS_AS(a.dot(vec({1, 2})), StructuralError);
  }
}
