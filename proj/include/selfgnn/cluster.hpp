#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "selfgnn/diffusion.hpp"
#include "selfgnn/graph.hpp"
#include "selfgnn/trainer.hpp"

namespace selfgnn {

struct Partition {
  int num_clusters = 0;
  std::vector<int> assignment;             // cluster id per node
  std::vector<std::vector<int>> clusters;  // ascending node ids per cluster

  /// Throws DataError unless the clusters are a disjoint, non-empty cover.
  void validate(int num_nodes) const;
};

Partition partition_from_assignment(std::vector<int> assignment);

/// Balanced multi-source BFS growth. Seeds are chosen farthest-first (the
/// first one at random), every cluster is capped at ceil(N / k) nodes, and
/// when all frontiers are exhausted the smallest open cluster is reseeded.
/// Greedy boundary moves then reduce the cut, keeping each cluster within
/// 30% of N / k.
Partition partition_graph(const Graph& g, int k, std::uint64_t seed);

/// N lines of cluster ids (for externally computed partitions).
Partition read_partition_file(const std::filesystem::path& path, int num_nodes);
void write_partition_file(const Partition& p, const std::filesystem::path& path);

/// Shuffles clusters with the "merge" substream and deals them round-robin
/// into b groups. Each group lists its nodes in ascending order.
std::vector<std::vector<int>> merge_clusters(const Partition& p, int b, std::uint64_t seed);

struct Subgraph {
  Graph graph;
  std::vector<int> global_ids;  // local id -> id in the parent graph
};

/// Relabels `nodes` to 0..n-1 in the order given and keeps intra-set edges.
Subgraph induced_subgraph(const Graph& g, const std::vector<int>& nodes);

/// Number of edges whose endpoints fall in different clusters.
std::int64_t cut_size(const Graph& g, const Partition& p);

struct ClusterConfig {
  int clusters = 16;
  int batches = 0;  // 0: max(1, clusters / 4)
  std::optional<std::filesystem::path> partition_file;

  int resolved_batches() const { return batches > 0 ? batches : std::max(1, clusters / 4); }
};

template <typename T>
struct ClusterTrainResult {
  TrainResult<T> train;
  Partition partition;
  std::vector<std::vector<int>> groups;
  DiffusionAllocStats diffusion_alloc;  // measured while the batches were prepared
  int largest_batch = 0;
};

/// One Batch per merged group, each with its own views and diffusion.
std::vector<Batch> make_cluster_batches(const Graph& g, const AugSpec& spec,
                                        const std::vector<std::vector<int>>& groups);

template <typename T>
ClusterTrainResult<T> train_clustered(const Graph& g, const AugSpec& spec, const TrainConfig& cfg,
                                      const ClusterConfig& cc);

}  // namespace selfgnn
