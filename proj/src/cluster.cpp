#include "selfgnn/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <sstream>

#include "selfgnn/errors.hpp"
#include "selfgnn/io.hpp"
#include "selfgnn/rng.hpp"

namespace selfgnn {

void Partition::validate(int num_nodes) const {
  if (static_cast<int>(assignment.size()) != num_nodes) throw DataError("partition: assignment length != node count");
  if (static_cast<int>(clusters.size()) != num_clusters) throw DataError("partition: cluster list length != k");
  std::vector<char> seen(static_cast<std::size_t>(num_nodes), 0);
  for (int c = 0; c < num_clusters; ++c) {
    if (clusters[static_cast<std::size_t>(c)].empty()) throw DataError("partition: cluster " + std::to_string(c) + " is empty");
    for (int v : clusters[static_cast<std::size_t>(c)]) {
      if (v < 0 || v >= num_nodes || seen[static_cast<std::size_t>(v)] || assignment[static_cast<std::size_t>(v)] != c) {
        throw DataError("partition: clusters are not a disjoint cover");
      }
      seen[static_cast<std::size_t>(v)] = 1;
    }
  }
  for (char s : seen) {
    if (!s) throw DataError("partition: clusters do not cover every node");
  }
}

Partition partition_from_assignment(std::vector<int> assignment) {
  Partition p;
  for (int c : assignment) {
    if (c < 0) throw DataError("partition: negative cluster id");
    p.num_clusters = std::max(p.num_clusters, c + 1);
  }
  p.clusters.assign(static_cast<std::size_t>(p.num_clusters), {});
  for (std::size_t v = 0; v < assignment.size(); ++v) {
    p.clusters[static_cast<std::size_t>(assignment[v])].push_back(static_cast<int>(v));
  }
  p.assignment = std::move(assignment);
  p.validate(static_cast<int>(p.assignment.size()));
  return p;
}

namespace {

constexpr int kRefinePasses = 20;

/// Hop distance from the nearest source; unreachable nodes get INT_MAX.
void bfs_relax(const SparseMatrix& adj, int source, std::vector<int>& dist) {
  std::deque<int> q{source};
  dist[static_cast<std::size_t>(source)] = 0;
  const auto& rp = adj.row_ptr();
  const auto& ci = adj.col_idx();
  while (!q.empty()) {
    const int u = q.front();
    q.pop_front();
    const int du = dist[static_cast<std::size_t>(u)];
    for (auto e = rp[static_cast<std::size_t>(u)]; e < rp[static_cast<std::size_t>(u) + 1]; ++e) {
      const int v = ci[static_cast<std::size_t>(e)];
      if (dist[static_cast<std::size_t>(v)] > du + 1) {
        dist[static_cast<std::size_t>(v)] = du + 1;
        q.push_back(v);
      }
    }
  }
}

/// Greedy boundary passes: a node moves to the neighbouring cluster holding
/// most of its neighbours when that strictly lowers the cut and both sizes
/// stay within 30% of N / k.
void refine_boundary(const SparseMatrix& adj, int k, std::vector<int>& assignment, std::vector<int>& size) {
  const int n = static_cast<int>(assignment.size());
  const double mean = static_cast<double>(n) / k;
  const int lo = std::max(1, static_cast<int>(std::ceil(0.7 * mean)));
  const int hi = std::max(lo, static_cast<int>(std::floor(1.3 * mean)));
  const auto& rp = adj.row_ptr();
  const auto& ci = adj.col_idx();
  std::vector<int> count(static_cast<std::size_t>(k), 0);
  std::vector<int> touched;
  for (int pass = 0; pass < kRefinePasses; ++pass) {
    int moved = 0;
    for (int v = 0; v < n; ++v) {
      const int own = assignment[static_cast<std::size_t>(v)];
      touched.clear();
      for (auto e = rp[static_cast<std::size_t>(v)]; e < rp[static_cast<std::size_t>(v) + 1]; ++e) {
        const int c = assignment[static_cast<std::size_t>(ci[static_cast<std::size_t>(e)])];
        if (count[static_cast<std::size_t>(c)]++ == 0) touched.push_back(c);
      }
      int best = own;
      for (int c : touched) {
        if (c == own || size[static_cast<std::size_t>(c)] >= hi) continue;
        if (count[static_cast<std::size_t>(c)] > count[static_cast<std::size_t>(best)] ||
            (count[static_cast<std::size_t>(c)] == count[static_cast<std::size_t>(best)] && best != own && c < best)) {
          best = c;
        }
      }
      const int gain = count[static_cast<std::size_t>(best)] - count[static_cast<std::size_t>(own)];
      for (int c : touched) count[static_cast<std::size_t>(c)] = 0;
      if (best == own || gain <= 0 || size[static_cast<std::size_t>(own)] <= lo) continue;
      assignment[static_cast<std::size_t>(v)] = best;
      --size[static_cast<std::size_t>(own)];
      ++size[static_cast<std::size_t>(best)];
      ++moved;
    }
    if (moved == 0) break;
  }
}

}  // namespace

Partition partition_graph(const Graph& g, int k, std::uint64_t seed) {
  const int n = g.num_nodes;
  if (k < 1) throw ConfigError("partition_graph: k must be >= 1");
  if (k > n) throw ConfigError("partition_graph: k = " + std::to_string(k) + " exceeds node count " + std::to_string(n));
  Rng rng = Rng::substream(seed, "partition");
  const auto& rp = g.adjacency.row_ptr();
  const auto& ci = g.adjacency.col_idx();

  std::vector<int> seeds;
  std::vector<int> dist(static_cast<std::size_t>(n), std::numeric_limits<int>::max());
  std::vector<char> is_seed(static_cast<std::size_t>(n), 0);
  seeds.push_back(static_cast<int>(rng.below(static_cast<std::uint64_t>(n))));
  is_seed[static_cast<std::size_t>(seeds.back())] = 1;
  bfs_relax(g.adjacency, seeds.back(), dist);
  while (static_cast<int>(seeds.size()) < k) {
    int best = -1;
    for (int v = 0; v < n; ++v) {
      if (is_seed[static_cast<std::size_t>(v)]) continue;
      if (best < 0 || dist[static_cast<std::size_t>(v)] > dist[static_cast<std::size_t>(best)]) best = v;
    }
    seeds.push_back(best);
    is_seed[static_cast<std::size_t>(best)] = 1;
    bfs_relax(g.adjacency, best, dist);
  }

  const int cap = (n + k - 1) / k;
  std::vector<int> assignment(static_cast<std::size_t>(n), -1);
  std::vector<int> size(static_cast<std::size_t>(k), 0);
  std::vector<std::deque<int>> frontier(static_cast<std::size_t>(k));
  int assigned = 0;
  auto take = [&](int c, int v) {
    assignment[static_cast<std::size_t>(v)] = c;
    ++size[static_cast<std::size_t>(c)];
    ++assigned;
    for (auto e = rp[static_cast<std::size_t>(v)]; e < rp[static_cast<std::size_t>(v) + 1]; ++e) {
      const int w = ci[static_cast<std::size_t>(e)];
      if (assignment[static_cast<std::size_t>(w)] < 0) frontier[static_cast<std::size_t>(c)].push_back(w);
    }
  };
  for (int c = 0; c < k; ++c) take(c, seeds[static_cast<std::size_t>(c)]);

  int next_unassigned = 0;
  while (assigned < n) {
    bool progressed = false;
    for (int c = 0; c < k; ++c) {
      auto& f = frontier[static_cast<std::size_t>(c)];
      if (size[static_cast<std::size_t>(c)] >= cap) {
        f.clear();
        continue;
      }
      while (!f.empty() && assignment[static_cast<std::size_t>(f.front())] >= 0) f.pop_front();
      if (f.empty()) continue;
      const int v = f.front();
      f.pop_front();
      take(c, v);
      progressed = true;
    }
    if (progressed || assigned >= n) continue;
    // Every frontier is exhausted: restart the smallest open cluster from
    // the lowest-numbered unassigned node.
    int smallest = -1;
    for (int c = 0; c < k; ++c) {
      if (size[static_cast<std::size_t>(c)] >= cap) continue;
      if (smallest < 0 || size[static_cast<std::size_t>(c)] < size[static_cast<std::size_t>(smallest)]) smallest = c;
    }
    while (assignment[static_cast<std::size_t>(next_unassigned)] >= 0) ++next_unassigned;
    take(smallest, next_unassigned);
  }
  refine_boundary(g.adjacency, k, assignment, size);
  return partition_from_assignment(std::move(assignment));
}

Partition read_partition_file(const std::filesystem::path& path, int num_nodes) {
  std::vector<int> assignment;
  for (const auto& raw : io::read_lines(path)) {
    const auto line = io::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto id = io::parse_int(io::split_tabs(line).front(), "cluster id");
    if (id < 0 || id > std::numeric_limits<int>::max()) throw DataError("partition file: bad cluster id " + std::to_string(id));
    assignment.push_back(static_cast<int>(id));
  }
  if (static_cast<int>(assignment.size()) != num_nodes) {
    throw DataError("partition file " + path.string() + " has " + std::to_string(assignment.size()) +
                    " entries, expected " + std::to_string(num_nodes));
  }
  return partition_from_assignment(std::move(assignment));
}

void write_partition_file(const Partition& p, const std::filesystem::path& path) {
  std::ostringstream os;
  for (int c : p.assignment) os << c << '\n';
  io::write_text(path, os.str());
}

std::vector<std::vector<int>> merge_clusters(const Partition& p, int b, std::uint64_t seed) {
  if (b < 1) throw ConfigError("merge_clusters: b must be >= 1");
  if (b > p.num_clusters) {
    throw ConfigError("merge_clusters: b = " + std::to_string(b) + " exceeds cluster count " +
                      std::to_string(p.num_clusters));
  }
  std::vector<int> order(static_cast<std::size_t>(p.num_clusters));
  for (int c = 0; c < p.num_clusters; ++c) order[static_cast<std::size_t>(c)] = c;
  Rng rng = Rng::substream(seed, "merge");
  rng.shuffle(order);
  std::vector<std::vector<int>> groups(static_cast<std::size_t>(b));
  for (std::size_t i = 0; i < order.size(); ++i) {
    auto& grp = groups[i % static_cast<std::size_t>(b)];
    const auto& members = p.clusters[static_cast<std::size_t>(order[i])];
    grp.insert(grp.end(), members.begin(), members.end());
  }
  for (auto& grp : groups) std::sort(grp.begin(), grp.end());
  return groups;
}

Subgraph induced_subgraph(const Graph& g, const std::vector<int>& nodes) {
  if (nodes.empty()) throw ConfigError("induced_subgraph: empty node set");
  std::vector<int> local(static_cast<std::size_t>(g.num_nodes), -1);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const int v = nodes[i];
    if (v < 0 || v >= g.num_nodes) throw ConfigError("induced_subgraph: node " + std::to_string(v) + " out of range");
    if (local[static_cast<std::size_t>(v)] >= 0) throw ConfigError("induced_subgraph: duplicate node " + std::to_string(v));
    local[static_cast<std::size_t>(v)] = static_cast<int>(i);
  }
  const int n = static_cast<int>(nodes.size());
  std::vector<Triplet> trips;
  const auto& rp = g.adjacency.row_ptr();
  const auto& ci = g.adjacency.col_idx();
  for (int i = 0; i < n; ++i) {
    const int u = nodes[static_cast<std::size_t>(i)];
    for (auto e = rp[static_cast<std::size_t>(u)]; e < rp[static_cast<std::size_t>(u) + 1]; ++e) {
      const int j = local[static_cast<std::size_t>(ci[static_cast<std::size_t>(e)])];
      if (j >= 0) trips.push_back({i, j, 1.0});
    }
  }
  Subgraph s;
  s.global_ids = nodes;
  Graph& h = s.graph;
  h.num_nodes = n;
  h.num_classes = g.num_classes;
  h.adjacency = SparseMatrix::from_triplets(n, n, trips);
  h.features.resize(n, g.features.cols());
  for (int i = 0; i < n; ++i) h.features.row(i) = g.features.row(nodes[static_cast<std::size_t>(i)]);
  if (g.has_labels()) {
    for (int v : nodes) h.labels.push_back(g.labels[static_cast<std::size_t>(v)]);
  }
  if (g.has_split()) {
    for (int v : nodes) h.split.push_back(g.split[static_cast<std::size_t>(v)]);
  }
  return s;
}

std::int64_t cut_size(const Graph& g, const Partition& p) {
  std::int64_t cut = 0;
  const auto& rp = g.adjacency.row_ptr();
  const auto& ci = g.adjacency.col_idx();
  for (int u = 0; u < g.num_nodes; ++u) {
    for (auto e = rp[static_cast<std::size_t>(u)]; e < rp[static_cast<std::size_t>(u) + 1]; ++e) {
      const int v = ci[static_cast<std::size_t>(e)];
      if (u < v && p.assignment[static_cast<std::size_t>(u)] != p.assignment[static_cast<std::size_t>(v)]) ++cut;
    }
  }
  return cut;
}

std::vector<Batch> make_cluster_batches(const Graph& g, const AugSpec& spec,
                                        const std::vector<std::vector<int>>& groups) {
  std::vector<Batch> batches;
  batches.reserve(groups.size());
  for (const auto& grp : groups) {
    Subgraph sub = induced_subgraph(g, grp);
    batches.emplace_back(make_views(sub.graph, spec), std::move(sub.global_ids));
    batches.back().pairing = spec.pairing;
  }
  return batches;
}

template <typename T>
ClusterTrainResult<T> train_clustered(const Graph& g, const AugSpec& spec, const TrainConfig& cfg,
                                      const ClusterConfig& cc) {
  ClusterTrainResult<T> res;
  if (cc.partition_file) {
    res.partition = read_partition_file(*cc.partition_file, g.num_nodes);
  } else {
    res.partition = partition_graph(g, cc.clusters, cfg.seed);
  }
  res.groups = merge_clusters(res.partition, cc.resolved_batches(), cfg.seed);
  for (const auto& grp : res.groups) res.largest_batch = std::max(res.largest_batch, static_cast<int>(grp.size()));
  reset_diffusion_alloc_stats();
  std::vector<Batch> batches = make_cluster_batches(g, spec, res.groups);
  res.diffusion_alloc = diffusion_alloc_stats();
  res.train = train_batches<T>(g, batches, cfg, true);
  return res;
}

template ClusterTrainResult<float> train_clustered<float>(const Graph&, const AugSpec&, const TrainConfig&,
                                                          const ClusterConfig&);
template ClusterTrainResult<double> train_clustered<double>(const Graph&, const AugSpec&, const TrainConfig&,
                                                            const ClusterConfig&);

}  // namespace selfgnn
