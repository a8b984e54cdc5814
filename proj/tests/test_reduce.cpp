#include <gtest/gtest.h>

#include "oracles.hpp"
#include "scitech/reduce.hpp"

using namespace scitech;

namespace {

double row_distance(const Matrix& m, std::size_t i, std::size_t j) {
  return std::sqrt(squared_euclidean(m.row(i), m.row(j)));
}

}  // namespace

TEST(KnnGraph, OrthonormalVectors) {
  std::vector<DocVector> v = {{"a", {1, 0, 0}, true}, {"b", {0, 1, 0}, true}, {"c", {0, 0, 1}, true}};
  const auto g = knn_graph(v, 1);
  for (const auto& nb : g.neighbors) {
    ASSERT_EQ(nb.size(), 1u);
    EXPECT_DOUBLE_EQ(nb[0].distance, 1.0);
  }
}

TEST(KnnGraph, DuplicatePointIsNearest) {
  std::vector<DocVector> v = {{"a", {1, 0}, true}, {"b", {0, 1}, true}, {"a2", {1, 0}, true}};
  const auto g = knn_graph(v, 1);
  EXPECT_EQ(g.neighbors[0][0].index, 2u);
  EXPECT_DOUBLE_EQ(g.neighbors[0][0].distance, 0.0);
}

TEST(KnnGraph, MatchesBruteForce) {
  const auto v = oracle::random_unit_vectors(100, 8, 21);
  const auto g = knn_graph(v, 10);
  const auto ref = oracle::brute_knn_graph(v, 10);
  for (std::size_t i = 0; i < v.size(); ++i) {
    ASSERT_EQ(g.neighbors[i].size(), 10u);
    for (std::size_t r = 0; r < 10; ++r) {
      EXPECT_EQ(g.neighbors[i][r].index, ref[i][r].first);
      EXPECT_NEAR(g.neighbors[i][r].distance, ref[i][r].second, 1e-9);
    }
  }
}

TEST(KnnGraph, KClampedWithWarning) {
  const auto v = oracle::random_unit_vectors(5, 3, 2);
  Warnings w;
  const auto g = knn_graph(v, 10, &w);
  EXPECT_EQ(g.k, 4u);
  EXPECT_EQ(g.neighbors[0].size(), 4u);
  EXPECT_EQ(w.size(), 1u);
}

TEST(Pca, CollinearPointsKeepDistanceRatios) {
  Matrix x(6, 3);
  const double t[] = {-2.0, -0.5, 0.0, 1.0, 2.5, 7.0};
  for (std::size_t i = 0; i < 6; ++i) {
    for (std::size_t k = 0; k < 3; ++k) x(i, k) = t[i] + 3.0;
  }
  const auto r = reduce_pca(x, 1);
  ASSERT_EQ(r.vectors.cols, 1u);
  const double ratio = row_distance(r.vectors, 0, 5) / row_distance(x, 0, 5);
  for (std::size_t i = 0; i < 6; ++i) {
    for (std::size_t j = i + 1; j < 6; ++j) {
      EXPECT_NEAR(row_distance(r.vectors, i, j) / row_distance(x, i, j), ratio, 1e-9);
    }
  }
}

TEST(Pca, FullDimensionIsARotation) {
  Rng rng(8);
  Matrix x(40, 6);
  for (auto& v : x.data) v = normal01(rng) * 3.0;
  const auto r = reduce_pca(x, 6);
  for (std::size_t i = 0; i < 40; ++i) {
    for (std::size_t j = i + 1; j < 40; ++j) EXPECT_NEAR(row_distance(r.vectors, i, j), row_distance(x, i, j), 1e-9);
  }
}

TEST(Pca, SeparatesLowNoiseBlobs) {
  Rng rng(3);
  const double noise = 1e-3;
  Matrix x(100, 50);
  std::vector<double> dir1(50), dir2(50);
  for (auto& v : dir1) v = normal01(rng);
  for (auto& v : dir2) v = normal01(rng);
  for (std::size_t i = 0; i < 100; ++i) {
    const auto& dir = i < 50 ? dir1 : dir2;
    for (std::size_t k = 0; k < 50; ++k) x(i, k) = dir[k] + noise * normal01(rng);
  }
  const auto r = reduce_pca(x, 2);
  std::vector<double> m1(2, 0.0), m2(2, 0.0);
  for (std::size_t i = 0; i < 100; ++i) {
    for (std::size_t k = 0; k < 2; ++k) (i < 50 ? m1 : m2)[k] += r.vectors(i, k) / 50.0;
  }
  EXPECT_GT(std::hypot(m1[0] - m2[0], m1[1] - m2[1]), 10.0 * noise);
}

TEST(Pca, SignConventionAndRankDeficiency) {
  Matrix x(4, 3);
  const double t[] = {0.0, 1.0, 2.0, 5.0};
  for (std::size_t i = 0; i < 4; ++i) {
    x(i, 0) = t[i];
    x(i, 1) = -2.0 * t[i];
  }
  Warnings w;
  const auto r = reduce_pca(x, 2, &w);
  EXPECT_FALSE(w.empty());
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(r.vectors(i, 1), 0.0, 1e-12);
  // Largest loading is on the second axis with negative data direction, so the
  // component is signed to make it positive: larger t means smaller output.
  EXPECT_LT(r.vectors(3, 0), r.vectors(0, 0));
}

TEST(Pca, TranslationLeavesDistancesUnchanged) {
  Rng rng(12);
  Matrix x(30, 5);
  for (auto& v : x.data) v = normal01(rng);
  Matrix y = x;
  for (std::size_t i = 0; i < 30; ++i) {
    for (std::size_t k = 0; k < 5; ++k) y(i, k) += 100.0 * static_cast<double>(k + 1);
  }
  const auto a = reduce_pca(x, 3);
  const auto b = reduce_pca(y, 3);
  for (std::size_t i = 0; i < 30; ++i) {
    for (std::size_t j = i + 1; j < 30; ++j) {
      EXPECT_NEAR(row_distance(a.vectors, i, j), row_distance(b.vectors, i, j), 1e-9);
    }
  }
}

TEST(NeighborEmbedding, CurveParametersForDefaultMinDist) {
  const auto p = fit_ab(0.1);
  // Reference values of the UMAP curve fit for min_dist 0.1, spread 1.
  EXPECT_NEAR(p.a, 1.577, 0.01);
  EXPECT_NEAR(p.b, 0.895, 0.01);
}

TEST(NeighborEmbedding, DeterministicForSeed) {
  const auto v = oracle::random_unit_vectors(120, 10, 5);
  const auto g = knn_graph(v, 10);
  NeighborEmbeddingParams p;
  p.n_epochs = 50;
  const auto a = reduce_neighbor_embedding(g, p);
  const auto b = reduce_neighbor_embedding(g, p);
  EXPECT_EQ(a.vectors.data, b.vectors.data);
  EXPECT_EQ(a.vectors.rows, 120u);
  EXPECT_EQ(a.vectors.cols, 5u);
  EXPECT_EQ(a.provenance, ReductionMethod::neighbor_embedding);
}

TEST(NeighborEmbedding, IdenticalPointsCollapse) {
  const std::size_t k = 10;
  std::vector<DocVector> v;
  for (std::size_t i = 0; i <= k; ++i) v.push_back({"p" + std::to_string(i), {0.6f, 0.8f}, true});
  const auto g = knn_graph(v, k);
  NeighborEmbeddingParams p;
  p.dim_out = 2;
  const auto r = reduce_neighbor_embedding(g, p);
  double diameter = 0.0;
  for (std::size_t i = 0; i < r.vectors.rows; ++i) {
    for (std::size_t j = i + 1; j < r.vectors.rows; ++j) diameter = std::max(diameter, row_distance(r.vectors, i, j));
  }
  EXPECT_LE(diameter, p.min_dist * 10.0);
}

TEST(NeighborEmbedding, RejectsInvalidGraph) {
  NeighborGraph g;
  g.k = 1;
  g.neighbors = {{{1, 0.5}}, {{5, 0.5}}};
  EXPECT_THROW(reduce_neighbor_embedding(g, {}), Error);
}

TEST(Preservation, IdentityLayoutIsPerfect) {
  const auto v = oracle::random_unit_vectors(60, 4, 9);
  const auto g = knn_graph(v, 5);
  // Unit vectors: Euclidean order equals cosine order.
  EXPECT_DOUBLE_EQ(neighborhood_preservation(g, to_matrix(v), 5), 1.0);
}
