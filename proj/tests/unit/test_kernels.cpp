#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "tagshot/embedding.hpp"
#include "tagshot/error.hpp"
#include "tagshot/kernels.hpp"
#include "tagshot/rng.hpp"

using namespace tagshot;

namespace {

std::vector<double> random_matrix(std::size_t rows, std::size_t dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::vector<double> m(rows * dim);
  for (auto& x : m) x = g(rng);
  return m;
}

}  // namespace

TEST_SUITE("kernels") {

TEST_CASE("cosine hand examples") {
  EmbeddingVector a{{1.0, 0.0}, "m"};
  EmbeddingVector b{{0.0, 1.0}, "m"};
  EmbeddingVector c{{1.0, 1.0}, "m"};
  CHECK(cosine(a, a) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(cosine(a, b) == 0.0);
  CHECK(std::abs(cosine(a, c) - 0.70710678) < 1e-8);
  CHECK(std::abs(cosine(a, c) - 1.0 / std::sqrt(2.0)) < 1e-12);
}

TEST_CASE("cosine errors and invariances") {
  EmbeddingVector a{{1.0, 2.0, 3.0}, "m"};
  EmbeddingVector z{{0.0, 0.0, 0.0}, "m"};
  EmbeddingVector short_v{{1.0, 2.0}, "m"};
  CHECK_THROWS_AS(cosine(a, z), EmbeddingError);
  CHECK_THROWS_AS(cosine(a, short_v), EmbeddingError);

  auto m = random_matrix(200, 8, 7);
  for (std::size_t i = 0; i + 1 < 200; i += 2) {
    std::span<const double> u(m.data() + i * 8, 8);
    std::span<const double> v(m.data() + (i + 1) * 8, 8);
    double const uv = cosine(u, v);
    CHECK(uv == doctest::Approx(cosine(v, u)).epsilon(1e-14));
    CHECK(uv <= 1.0);
    CHECK(uv >= -1.0);
    std::vector<double> scaled(u.begin(), u.end());
    for (auto& x : scaled) x *= 3.5;
    CHECK(cosine(scaled, v) == doctest::Approx(uv).epsilon(1e-12));
  }
}

TEST_CASE("parallel kernels equal serial references bitwise") {
  std::size_t const dim = 33;
  auto a = random_matrix(257, dim, 1);
  auto b = random_matrix(61, dim, 2);
  kernels::RowsView av{a, dim};
  kernels::RowsView bv{b, dim};

  std::vector<double> s1(av.rows());
  std::vector<double> p1(av.rows());
  kernels::serial::cosine_scan(bv.row(0), av, s1);
  kernels::parallel::cosine_scan(bv.row(0), av, p1);
  CHECK(s1 == p1);

  std::vector<double> s2(av.rows() * bv.rows());
  std::vector<double> p2(s2.size());
  kernels::serial::cosine_matrix(av, bv, s2);
  kernels::parallel::cosine_matrix(av, bv, p2);
  CHECK(s2 == p2);

  std::vector<double> rw(av.rows());
  std::vector<double> cw(bv.rows());
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.1, 2.0);
  for (auto& x : rw) x = u(rng);
  for (auto& x : cw) x = u(rng);
  auto sg = kernels::serial::greedy_match(s2, av.rows(), bv.rows(), rw, cw);
  auto pg = kernels::parallel::greedy_match(s2, av.rows(), bv.rows(), rw, cw);
  CHECK(sg.precision == pg.precision);
  CHECK(sg.recall == pg.recall);
}

TEST_CASE("greedy match against a brute-force row/column max") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::size_t const m = 1 + rng() % 6;
    std::size_t const n = 1 + rng() % 6;
    std::vector<double> sim(m * n);
    for (auto& x : sim) x = u(rng);
    double p = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      double best = -2.0;
      for (std::size_t j = 0; j < n; ++j) best = std::max(best, sim[i * n + j]);
      p += best;
    }
    double r = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      double best = -2.0;
      for (std::size_t i = 0; i < m; ++i) best = std::max(best, sim[i * n + j]);
      r += best;
    }
    auto g = kernels::serial::greedy_match(sim, m, n);
    CHECK(g.precision == doctest::Approx(p / m).epsilon(1e-12));
    CHECK(g.recall == doctest::Approx(r / n).epsilon(1e-12));
  }
}

}  // TEST_SUITE

TEST_SUITE("rng") {

TEST_CASE("sampling is deterministic, distinct and in range") {
  for (std::uint64_t seed : {0ull, 1ull, 42ull, 0xdeadbeefull}) {
    auto a = sample_without_replacement(100, 5, seed);
    auto b = sample_without_replacement(100, 5, seed);
    CHECK(a == b);
    std::set<std::size_t> uniq(a.begin(), a.end());
    CHECK(uniq.size() == 5);
    for (auto i : a) CHECK(i < 100);
  }
  CHECK(sample_without_replacement(100, 5, 1) != sample_without_replacement(100, 5, 2));
  auto all = sample_without_replacement(5, 5, 9);
  CHECK(std::set<std::size_t>(all.begin(), all.end()).size() == 5);
  CHECK(derive_seed(42, 1) != derive_seed(42, 2));
  CHECK(derive_seed(42, 1) == derive_seed(42, 1));
}

TEST_CASE("sampling is close to uniform") {
  std::vector<std::size_t> hits(10, 0);
  std::size_t const trials = 20000;
  for (std::size_t t = 0; t < trials; ++t) {
    for (auto i : sample_without_replacement(10, 3, derive_seed(5, t))) ++hits[i];
  }
  // Each index is chosen with probability 3/10; allow 5 standard deviations.
  double const expected = trials * 0.3;
  double const sd = std::sqrt(trials * 0.3 * 0.7);
  for (auto h : hits) CHECK(std::abs(static_cast<double>(h) - expected) < 5 * sd);
}

}  // TEST_SUITE
