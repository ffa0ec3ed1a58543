#include <gtest/gtest.h>

#include "selfgnn/feature_aug.hpp"
#include "gradcheck.hpp"
#include "synthetic.hpp"

using namespace selfgnn;
namespace st = selfgnn::testing;

TEST(Split, EvenWidth) {
  Rng rng(1);
  const DenseMatrix x = st::random_matrix(3, 4, rng);
  const auto [a, b] = split_features(x);
  EXPECT_EQ(a.matrix, x.leftCols(2));
  EXPECT_EQ(b.matrix, x.rightCols(2));
}

TEST(Split, OddWidthFirstViewGetsExtraColumn) {
  Rng rng(2);
  const DenseMatrix x = st::random_matrix(3, 5, rng);
  const auto [a, b] = split_features(x);
  EXPECT_EQ(a.matrix.cols(), 3);
  EXPECT_EQ(b.matrix.cols(), 2);
  DenseMatrix joined(3, 5);
  joined << a.matrix, b.matrix;
  EXPECT_EQ(joined, x);
}

TEST(Split, CoraWidths) {
  const DenseMatrix x = DenseMatrix::Zero(2, 1433);
  const auto [a, b] = split_features(x);
  EXPECT_EQ(a.matrix.cols(), 717);
  EXPECT_EQ(b.matrix.cols(), 716);
}

TEST(Standardize, ConstantColumnBecomesZero) {
  DenseMatrix x(3, 2);
  x << 4, 0, 4, 2, 4, 1;
  const DenseMatrix z = standardize(x).matrix;
  EXPECT_TRUE(z.col(0).isZero(0.0));
}

TEST(Standardize, TwoValueColumn) {
  DenseMatrix x(2, 1);
  x << 0, 2;
  const DenseMatrix z = standardize(x).matrix;
  EXPECT_DOUBLE_EQ(z(0, 0), -1.0);
  EXPECT_DOUBLE_EQ(z(1, 0), 1.0);
}

TEST(Standardize, MomentsAndIdempotence) {
  Rng rng(3);
  const DenseMatrix x = st::random_matrix(50, 6, rng, -3.0, 7.0);
  const DenseMatrix z = standardize(x).matrix;
  for (Eigen::Index j = 0; j < z.cols(); ++j) {
    const double mean = z.col(j).mean();
    const double sd = std::sqrt((z.col(j).array() - mean).square().mean());
    EXPECT_NEAR(mean, 0.0, 1e-6);
    EXPECT_NEAR(sd, 1.0, 1e-6);
  }
  EXPECT_LT((standardize(z).matrix - z).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Ldp, StarGraph) {
  const DenseMatrix p = ldp(st::star_graph(3));
  EXPECT_EQ(p.row(0), (Eigen::RowVectorXd(5) << 3, 1, 1, 1, 0).finished());
  for (int leaf = 1; leaf <= 3; ++leaf) EXPECT_EQ(p.row(leaf), (Eigen::RowVectorXd(5) << 1, 3, 3, 3, 0).finished());
}

TEST(Ldp, IsolatedNode) {
  EXPECT_TRUE(ldp(st::graph_from_edges(2, {})).isZero(0.0));
}

TEST(Ldp, PopulationStd) {
  // Node 0 of a path 1-0-2-3 has neighbour degrees {1, 2}: mean 1.5, std 0.5.
  const DenseMatrix p = ldp(st::graph_from_edges(4, {{0, 1}, {0, 2}, {2, 3}}));
  EXPECT_DOUBLE_EQ(p(0, 3), 1.5);
  EXPECT_DOUBLE_EQ(p(0, 4), 0.5);
}

TEST(Ldp, EquivariantUnderRelabeling) {
  Rng rng(4);
  const Graph g = st::random_graph(25, 0.2, rng);
  const std::vector<int> perm = rng.permutation(25);  // new id of old node i
  std::vector<std::pair<int, int>> edges;
  const auto& rp = g.adjacency.row_ptr();
  const auto& ci = g.adjacency.col_idx();
  for (int i = 0; i < 25; ++i)
    for (auto k = rp[i]; k < rp[i + 1]; ++k) edges.emplace_back(perm[i], perm[ci[k]]);
  const DenseMatrix a = ldp(g);
  const DenseMatrix b = ldp(st::graph_from_edges(25, edges));
  for (int i = 0; i < 25; ++i) EXPECT_LT((a.row(i) - b.row(perm[i])).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(LdpPadded, Widths) {
  const Graph g = st::star_graph(3);
  EXPECT_EQ(ldp_padded(g, 5).matrix, ldp(g));
  const DenseMatrix p7 = ldp_padded(g, 7).matrix;
  EXPECT_EQ(p7.cols(), 7);
  EXPECT_EQ(p7.leftCols(5), ldp(g));
  EXPECT_TRUE(p7.rightCols(2).isZero(0.0));
  EXPECT_THROW(ldp_padded(g, 4), ConfigError);
}

TEST(Paste, ViewsDifferOnlyInLdpBlock) {
  const Graph g = st::star_graph(3, 4);
  Rng rng(5);
  const DenseMatrix x = st::random_matrix(4, 4, rng);
  const auto [a, b] = paste(x, g);
  EXPECT_EQ(a.matrix.cols(), 9);
  EXPECT_EQ(a.matrix.leftCols(4), b.matrix.leftCols(4));
  EXPECT_EQ(b.matrix.leftCols(4), x);
  EXPECT_EQ(b.matrix.rightCols(5), ldp(g));
  EXPECT_TRUE(a.matrix.rightCols(5).isZero(0.0));
}

TEST(Paste, IsolatedNodesGiveIdenticalViews) {
  const Graph g = st::graph_from_edges(3, {}, 2);
  const auto [a, b] = paste(g.features, g);
  EXPECT_EQ(a.matrix, b.matrix);
}

TEST(Permute, IdentityInverseAndRowSums) {
  Rng rng(6);
  const DenseMatrix x = st::random_matrix(6, 9, rng);
  std::vector<int> id(9);
  for (int i = 0; i < 9; ++i) id[i] = i;
  EXPECT_EQ(permute_features(x, id), x);
  const auto perm = random_feature_permutation(9, 42);
  EXPECT_EQ(permute_features(permute_features(x, perm), inverse_permutation(perm)), x);
  EXPECT_LT((permute_features(x, perm).rowwise().sum() - x.rowwise().sum()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(random_feature_permutation(9, 42), perm);
}

TEST(Permute, RejectsNonPermutation) {
  EXPECT_THROW(permute_features(DenseMatrix::Zero(1, 3), {0, 0, 1}), ConfigError);
}
