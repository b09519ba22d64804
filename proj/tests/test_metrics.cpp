#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>
#include <sstream>

#include "newsrec/error.hpp"
#include "newsrec/metrics.hpp"
#include "newsrec/rng.hpp"
#include "oracles.hpp"

using namespace newsrec;

namespace {

RecommendationList list_of(std::vector<std::string> ids, std::string impression = "1") {
  RecommendationList r{std::move(impression), std::move(ids), {}};
  for (std::size_t i = 0; i < r.ids.size(); ++i) r.scores.push_back(-static_cast<double>(i));
  return r;
}

// Two top-k lists of length k sharing exactly `shared` items.
std::pair<RecommendationList, RecommendationList> overlap(std::size_t k, std::size_t shared) {
  std::vector<std::string> a, b;
  for (std::size_t i = 0; i < k; ++i) a.push_back("N" + std::to_string(i));
  for (std::size_t i = 0; i < shared; ++i) b.push_back("N" + std::to_string(i));
  for (std::size_t i = shared; i < k; ++i) b.push_back("M" + std::to_string(i));
  return {list_of(a), list_of(b)};
}

EmbeddingMatrix random_embedding(Rng& rng, std::size_t n, std::size_t d) {
  EmbeddingMatrix e;
  for (std::size_t i = 0; i < n; ++i) e.ids.push_back("N" + std::to_string(i));
  e.matrix = oracle::to_tensor(oracle::random_mat(rng, n, d));
  return e;
}

// Random orthogonal matrix from Gram-Schmidt on a Gaussian draw.
oracle::Mat random_orthogonal(Rng& rng, std::size_t d) {
  oracle::Mat q = oracle::random_mat(rng, d, d);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      double dot = 0.0;
      for (std::size_t c = 0; c < d; ++c) dot += q[i][c] * q[j][c];
      for (std::size_t c = 0; c < d; ++c) q[i][c] -= dot * q[j][c];
    }
    double norm = 0.0;
    for (double v : q[i]) norm += v * v;
    for (double& v : q[i]) v /= std::sqrt(norm);
  }
  return q;
}

}  // namespace

TEST_CASE("ndcg") {
  std::vector<int> first{1, 0, 0, 0}, second{0, 1, 0, 0}, none{0, 0, 0};
  CHECK(*ndcg_at_k(first, 10) == 1.0);
  CHECK(*ndcg_at_k(second, 10) == doctest::Approx(0.6309).epsilon(1e-4));
  CHECK_FALSE(ndcg_at_k(none, 10).has_value());
  CHECK_THROWS_AS(ndcg_at_k(first, 0), UsageError);

  Rng rng(3);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = rng.between(1, 10), k = rng.between(1, 12);
    std::vector<int> labels(n);
    for (auto& l : labels) l = rng.bernoulli(0.3);
    if (std::accumulate(labels.begin(), labels.end(), 0) == 0) labels[rng.index(n)] = 1;
    CHECK(std::abs(*ndcg_at_k(labels, k) - oracle::ndcg(labels, k)) <= 1e-12);
  }

  SUBCASE("moving the positive down never helps") {
    double previous = 2.0;
    for (std::size_t pos = 0; pos < 12; ++pos) {
      std::vector<int> labels(12, 0);
      labels[pos] = 1;
      const double v = *ndcg_at_k(labels, 10);
      CHECK(v <= previous);
      previous = v;
    }
  }
}

TEST_CASE("jaccard") {
  auto [a7, b7] = overlap(10, 7);
  CHECK(jaccard_at_k(a7, b7, 10) == 7.0 / 13.0);
  CHECK(jaccard_at_k(a7, b7, 10) == doctest::Approx(0.538).epsilon(1e-3));
  auto [a8, b8] = overlap(10, 8);
  CHECK(jaccard_at_k(a8, b8, 10) == 8.0 / 12.0);
  auto [a3, b3] = overlap(5, 3);
  CHECK(jaccard_at_k(a3, b3, 5) == 3.0 / 7.0);

  auto same = list_of({"A", "B", "C"});
  CHECK(jaccard_at_k(same, same, 2) == 1.0);
  CHECK(jaccard_at_k(list_of({"A", "B", "C", "D"}), list_of({"C", "D", "A", "B"}), 2) == 0.0);
  CHECK(jaccard_at_k(list_of({"A", "B", "C", "D"}), list_of({"C", "D", "A", "B"}), 4) == 1.0);
  CHECK_THROWS_AS(jaccard_at_k(list_of({"A"}, "1"), list_of({"A"}, "2"), 1), UsageError);

  SUBCASE("order within the top k does not matter") {
    CHECK(jaccard_at_k(list_of({"A", "B", "C"}), list_of({"B", "A", "D"}), 2) == 1.0);
  }
  SUBCASE("random permutations against the set oracle") {
    Rng rng(9);
    for (int trial = 0; trial < 300; ++trial) {
      const std::size_t n = rng.between(1, 10), k = rng.between(1, 10);
      std::vector<std::string> ids;
      for (std::size_t i = 0; i < n; ++i) ids.push_back("N" + std::to_string(i));
      auto p = ids, q = ids;
      std::shuffle(p.begin(), p.end(), rng.engine());
      std::shuffle(q.begin(), q.end(), rng.engine());
      const double v = jaccard_at_k(list_of(p), list_of(q), k);
      CHECK(std::abs(v - oracle::jaccard(p, q, k)) <= 1e-12);
      CHECK(v == jaccard_at_k(list_of(q), list_of(p), k));
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
      if (k >= n) CHECK(v == 1.0);
    }
  }
}

TEST_CASE("hsic") {
  Rng rng(4);
  auto s = oracle::to_tensor(oracle::random_mat(rng, 5, 5));
  auto t = oracle::to_tensor(oracle::random_mat(rng, 5, 5));
  CHECK(std::abs(hsic_linear(s, t) - oracle::hsic(oracle::to_mat(s), oracle::to_mat(t))) <= 1e-9);
  CHECK(std::abs(hsic_linear(s, t) - hsic_linear(t, s)) <= 1e-12 * (1 + std::abs(hsic_linear(s, t))));
  Tensor constant({5, 5}, 3.0);
  CHECK(std::abs(hsic_linear(s, constant)) <= 1e-12);
  CHECK_THROWS_AS(hsic_linear(Tensor({1, 1}, 1.0), Tensor({1, 1}, 1.0)), DegenerateInputError);
  CHECK_THROWS_AS(hsic_linear(s, Tensor({4, 4})), DimensionError);
}

TEST_CASE("linear cka") {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = rng.between(3, 10), d = rng.between(1, 6), d2 = rng.between(1, 6);
    auto e = random_embedding(rng, n, d);
    auto f = random_embedding(rng, n, d2);
    CHECK(std::abs(linear_cka(e, e) - 1.0) <= 1e-9);
    const double ef = linear_cka(e, f);
    CHECK(std::abs(ef - linear_cka(f, e)) <= 1e-9);
    CHECK(std::abs(ef - oracle::cka_feature_space(oracle::to_mat(e.matrix), oracle::to_mat(f.matrix))) <= 1e-9);

    auto q = random_orthogonal(rng, d);
    const double c = rng.uniform(0.1, 5.0) * (rng.bernoulli(0.5) ? -1.0 : 1.0);
    auto rotated = oracle::matmul(oracle::to_mat(e.matrix), q);
    for (auto& row : rotated)
      for (double& v : row) v *= c;
    EmbeddingMatrix g{e.ids, oracle::to_tensor(rotated)};
    CHECK(std::abs(linear_cka(e, g) - 1.0) <= 1e-6);
  }
  auto e = random_embedding(rng, 4, 3);
  auto other = e;
  other.ids[2] = "X";
  try {
    linear_cka(e, other);
    FAIL("expected a usage error");
  } catch (const UsageError& err) {
    CHECK(std::string(err.what()).find("X") != std::string::npos);
  }
  EmbeddingMatrix flat{e.ids, Tensor({4, 3}, 1.0)};
  CHECK_THROWS_AS(linear_cka(e, flat), DegenerateInputError);

  auto sub = subsample_rows(e, 2, 7);
  CHECK(sub.ids.size() == 2);
  CHECK(subsample_rows(e, 2, 7).ids == sub.ids);
  CHECK(subsample_rows(e, 10, 7).ids == e.ids);
}

TEST_CASE("comparison matrices") {
  Rng rng(6);
  SUBCASE("single model") {
    auto m = cka_matrix({"a"}, {random_embedding(rng, 5, 3)});
    CHECK(m.values.at(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("three models match pairwise calls") {
    std::vector<EmbeddingMatrix> es{random_embedding(rng, 8, 3), random_embedding(rng, 8, 4),
                                    random_embedding(rng, 8, 2)};
    auto m = cka_matrix({"a", "b", "c"}, es);
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 3; ++j) CHECK(m.values.at(i, j) == linear_cka(es[i], es[j]));
    std::stringstream csv;
    write_comparison_csv(m, csv);
    auto back = read_comparison_csv(csv);
    CHECK(back.labels == m.labels);
    CHECK(back.metric == "cka");
    CHECK(std::abs(back.values.at(0, 1) - m.values.at(0, 1)) <= 5e-7);
  }
  SUBCASE("disjoint top k everywhere") {
    std::vector<std::vector<RecommendationList>> lists{
        {list_of({"A", "B", "C", "D"}, "1"), list_of({"E", "F", "G", "H"}, "2")},
        {list_of({"C", "D", "A", "B"}, "1"), list_of({"G", "H", "E", "F"}, "2")}};
    auto m = jaccard_matrix({"x", "y"}, lists, 2);
    CHECK(m.values.at(0, 1) == 0.0);
    CHECK(m.metric == "jaccard@2");
    auto full = jaccard_matrix({"x", "y"}, lists, 4);
    CHECK(full.values.at(0, 1) == 1.0);
    auto sweep = jaccard_sweep({"x", "y"}, lists, 1, 4);
    CHECK(sweep.mean_curve() == std::vector<double>{0.0, 0.0, 0.5, 1.0});
  }
  SUBCASE("pair errors carry labels") {
    std::vector<std::vector<RecommendationList>> lists{{list_of({"A"}, "1")}, {list_of({"A"}, "2")}};
    try {
      jaccard_matrix({"x", "y"}, lists, 1);
      FAIL("expected a usage error");
    } catch (const UsageError& e) {
      CHECK(std::string(e.what()).find("x vs y") != std::string::npos);
    }
  }
  SUBCASE("asymmetric matrices are rejected") {
    ComparisonMatrix m{{"a", "b"}, Tensor::matrix(2, 2, {1, 0.5, 0.4, 1}), "cka"};
    CHECK_THROWS_AS(m.validate(true), UsageError);
  }
}

TEST_CASE("hierarchical clustering") {
  SUBCASE("two items") {
    ComparisonMatrix m{{"a", "b"}, Tensor::matrix(2, 2, {1, 0.3, 0.3, 1}), "cka"};
    auto d = hierarchical_cluster(m);
    REQUIRE(d.merges.size() == 1);
    CHECK(d.merges[0].height == doctest::Approx(0.7));
    std::ostringstream out;
    write_dendrogram(d, out);
    CHECK(out.str() == "merge a b at 0.700000\n");
  }
  SUBCASE("perfect pair merges first") {
    ComparisonMatrix m{{"a", "b", "c"},
                       Tensor::matrix(3, 3, {1, 1, 0.2, 1, 1, 0.4, 0.2, 0.4, 1}), "cka"};
    auto d = hierarchical_cluster(m);
    CHECK(d.merges[0].a == 0);
    CHECK(d.merges[0].b == 1);
    CHECK(d.merges[0].height == 0.0);
    CHECK(d.merges[1].a == 2);
    CHECK(d.merges[1].b == 3);
    CHECK(d.merges[1].height == doctest::Approx(0.7));
  }
  SUBCASE("random matrices match the recomputing oracle") {
    Rng rng(8);
    for (int trial = 0; trial < 20; ++trial) {
      const std::size_t n = 5;
      Tensor s({n, n});
      for (std::size_t i = 0; i < n; ++i) {
        s.at(i, i) = 1.0;
        for (std::size_t j = i + 1; j < n; ++j) s.at(i, j) = s.at(j, i) = rng.uniform();
      }
      auto d = hierarchical_cluster({{"a", "b", "c", "d", "e"}, s, "cka"});
      auto expected = oracle::average_linkage(oracle::to_mat(s));
      REQUIRE(d.merges.size() == expected.size());
      for (std::size_t k = 0; k < expected.size(); ++k) {
        CHECK(d.merges[k].a == expected[k].a);
        CHECK(d.merges[k].b == expected[k].b);
        CHECK(std::abs(d.merges[k].height - expected[k].height) <= 1e-12);
      }
    }
  }
}
