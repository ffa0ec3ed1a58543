#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "selfgnn/cluster.hpp"
#include "synthetic.hpp"
#include "tempdir.hpp"

using namespace selfgnn;
namespace st = selfgnn::testing;

namespace {

Graph two_cliques(int n) {
  std::vector<std::pair<int, int>> edges;
  for (int base : {0, n})
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) edges.emplace_back(base + i, base + j);
  return st::graph_from_edges(2 * n, edges);
}

void expect_cover(const std::vector<std::vector<int>>& groups, int n) {
  std::vector<int> all;
  for (const auto& g : groups) {
    EXPECT_FALSE(g.empty());
    EXPECT_TRUE(std::is_sorted(g.begin(), g.end()));
    all.insert(all.end(), g.begin(), g.end());
  }
  std::sort(all.begin(), all.end());
  ASSERT_EQ(static_cast<int>(all.size()), n);
  for (int i = 0; i < n; ++i) EXPECT_EQ(all[i], i);
}

}  // namespace

TEST(Partition, OneCluster) {
  Rng rng(1);
  const Graph g = st::random_graph(30, 0.1, rng);
  const Partition p = partition_graph(g, 1, 0);
  ASSERT_EQ(p.num_clusters, 1);
  EXPECT_EQ(p.clusters[0].size(), 30u);
}

TEST(Partition, Singletons) {
  Rng rng(2);
  const Graph g = st::random_graph(20, 0.2, rng);
  const Partition p = partition_graph(g, 20, 0);
  for (const auto& c : p.clusters) EXPECT_EQ(c.size(), 1u);
  p.validate(20);
}

TEST(Partition, TwoCliquesZeroCut) {
  const Graph g = two_cliques(50);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Partition p = partition_graph(g, 2, seed);
    EXPECT_EQ(cut_size(g, p), 0) << "seed " << seed;
    EXPECT_EQ(p.clusters[0].size(), 50u);
  }
}

TEST(Partition, BalancedDisjointCover) {
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 40 + static_cast<int>(rng.below(100));
    const int k = 1 + static_cast<int>(rng.below(12));
    const Graph g = st::random_graph(n, 0.05, rng);
    const Partition p = partition_graph(g, k, trial);
    p.validate(n);
    EXPECT_EQ(p.num_clusters, k);
    const int cap = std::max((n + k - 1) / k, static_cast<int>(1.3 * n / k));
    for (const auto& c : p.clusters) {
      EXPECT_LE(static_cast<int>(c.size()), cap);
      EXPECT_LE(static_cast<int>(c.size()), 2 * n / k);
    }
    expect_cover(p.clusters, n);
  }
}

TEST(Partition, NoSingleMoveLowersTheCut) {
  Rng rng(4);
  for (int trial = 0; trial < 5; ++trial) {
    const int n = 60 + static_cast<int>(rng.below(60));
    const int k = 2 + static_cast<int>(rng.below(6));
    const Graph g = st::random_graph(n, 0.06, rng);
    const Partition p = partition_graph(g, k, trial);
    const std::int64_t cut = cut_size(g, p);
    const double mean = static_cast<double>(n) / k;
    const int lo = std::max(1, static_cast<int>(std::ceil(0.7 * mean)));
    const int hi = std::max(lo, static_cast<int>(std::floor(1.3 * mean)));
    for (int v = 0; v < n; ++v) {
      const int own = p.assignment[v];
      if (static_cast<int>(p.clusters[own].size()) <= lo) continue;
      for (int c = 0; c < k; ++c) {
        if (c == own || static_cast<int>(p.clusters[c].size()) >= hi) continue;
        auto moved = p.assignment;
        moved[v] = c;
        EXPECT_GE(cut_size(g, partition_from_assignment(moved)), cut) << "trial " << trial << " node " << v;
      }
    }
  }
}

TEST(Partition, BadKIsConfigError) {
  const Graph g = st::path_graph(5);
  EXPECT_THROW(partition_graph(g, 0, 0), ConfigError);
  EXPECT_THROW(partition_graph(g, 6, 0), ConfigError);
}

TEST(Partition, FileRoundTrip) {
  Rng rng(4);
  const Graph g = st::random_graph(33, 0.1, rng);
  const Partition p = partition_graph(g, 5, 7);
  st::TempDir dir("part");
  write_partition_file(p, dir / "p.tsv");
  const Partition q = read_partition_file(dir / "p.tsv", 33);
  EXPECT_EQ(q.assignment, p.assignment);
  EXPECT_THROW(read_partition_file(dir / "p.tsv", 34), DataError);
}

TEST(Merge, GroupsEqualClustersWhenBEqualsK) {
  Rng rng(5);
  const Graph g = st::random_graph(40, 0.1, rng);
  const Partition p = partition_graph(g, 6, 1);
  auto groups = merge_clusters(p, 6, 9);
  std::set<std::vector<int>> a(groups.begin(), groups.end());
  std::set<std::vector<int>> b(p.clusters.begin(), p.clusters.end());
  EXPECT_EQ(a, b);
}

TEST(Merge, SingleGroupCoversAll) {
  Rng rng(6);
  const Graph g = st::random_graph(40, 0.1, rng);
  const auto groups = merge_clusters(partition_graph(g, 6, 1), 1, 3);
  ASSERT_EQ(groups.size(), 1u);
  expect_cover(groups, 40);
}

TEST(Merge, DisjointCoverForAnyB) {
  Rng rng(7);
  const Graph g = st::random_graph(64, 0.08, rng);
  const Partition p = partition_graph(g, 16, 2);
  for (int b = 1; b <= 16; ++b) {
    const auto groups = merge_clusters(p, b, static_cast<std::uint64_t>(b));
    EXPECT_EQ(static_cast<int>(groups.size()), b);
    expect_cover(groups, 64);
  }
  EXPECT_THROW(merge_clusters(p, 17, 0), ConfigError);
}

TEST(Subgraph, WholeGraphIsIdentity) {
  Rng rng(8);
  const Graph g = st::random_graph(15, 0.3, rng);
  std::vector<int> all(15);
  for (int i = 0; i < 15; ++i) all[i] = i;
  const Subgraph s = induced_subgraph(g, all);
  EXPECT_EQ(s.graph.adjacency.to_dense(), g.adjacency.to_dense());
  EXPECT_EQ(s.graph.features, g.features);
  EXPECT_EQ(s.global_ids, all);
}

TEST(Subgraph, EdgeAndTriangle) {
  const Graph path = st::graph_from_edges(4, {{1, 3}, {0, 1}});
  const Subgraph e = induced_subgraph(path, {3, 1});
  EXPECT_EQ(e.graph.num_nodes, 2);
  EXPECT_EQ(e.graph.adjacency.nnz(), 2);
  const Subgraph t = induced_subgraph(st::complete_graph(3), {0, 2});
  EXPECT_EQ(t.graph.adjacency.nnz(), 2);
  EXPECT_EQ(t.global_ids, (std::vector<int>{0, 2}));
}

TEST(Subgraph, PreservesAdjacency) {
  Rng rng(9);
  const Graph g = st::random_graph(40, 0.15, rng);
  std::vector<int> nodes = rng.permutation(40);
  nodes.resize(17);
  const Subgraph s = induced_subgraph(g, nodes);
  for (int i = 0; i < 17; ++i)
    for (int j = 0; j < 17; ++j) EXPECT_EQ(s.graph.adjacency.at(i, j), g.adjacency.at(nodes[i], nodes[j]));
}

TEST(ClusterBatches, PerBatchPprResidual) {
  Rng rng(10);
  const Graph g = st::random_graph(80, 0.06, rng);
  const auto groups = merge_clusters(partition_graph(g, 8, 0), 3, 0);
  for (const auto& nodes : groups) {
    const Subgraph s = induced_subgraph(g, nodes);
    const SparseMatrix a = symmetric_renormalize(s.graph);
    DiffusionConfig cfg;
    const DenseMatrix h = ppr_diffusion(a, cfg);
    const int n = s.graph.num_nodes;
    const DenseMatrix r = (DenseMatrix::Identity(n, n) - (1.0 - cfg.alpha) * a.to_dense()) * h -
                          cfg.alpha * DenseMatrix::Identity(n, n);
    EXPECT_LT(r.cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(ClusterConfig, DefaultBatches) {
  ClusterConfig c;
  EXPECT_EQ(c.resolved_batches(), 4);
  c.clusters = 3;
  EXPECT_EQ(c.resolved_batches(), 1);
}
