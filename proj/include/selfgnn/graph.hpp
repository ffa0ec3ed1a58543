#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "selfgnn/dense.hpp"
#include "selfgnn/sparse.hpp"

namespace selfgnn {

enum class SplitTag { kNone, kTrain, kVal, kTest };

const char* to_string(SplitTag tag);
SplitTag parse_split_tag(const std::string& s);

/// Undirected, unweighted attributed graph.
struct Graph {
  int num_nodes = 0;
  int num_classes = 0;
  SparseMatrix adjacency;    // symmetric, unit weights, no self-loops
  DenseMatrix features;      // num_nodes x num_features
  std::vector<int> labels;   // -1 = unlabeled; empty when absent
  std::vector<SplitTag> split;  // empty when absent

  int num_features() const { return static_cast<int>(features.cols()); }
  bool has_labels() const { return !labels.empty(); }
  bool has_split() const { return !split.empty(); }

  /// Throws DataError when an invariant does not hold.
  void validate() const;
};

/// Builds the symmetric unit-weight adjacency from an edge list. Edges are
/// treated as undirected; duplicates and self-loops are dropped.
SparseMatrix adjacency_from_edges(int num_nodes, const std::vector<std::pair<int, int>>& edges);

/// Reads a dataset bundle directory (graph.tsv, features.tsv, meta.tsv and the
/// optional labels.tsv, split.tsv).
Graph load_graph_bundle(const std::filesystem::path& dir);

/// Writes g in bundle format. Labels and split are written when present.
void save_graph_bundle(const Graph& g, const std::filesystem::path& dir);

/// Degree of A (self-loops excluded).
DenseVector degree_vector(const Graph& g);

/// D^{-1/2} (A + I) D^{-1/2} with D the degree matrix of A + I.
SparseMatrix symmetric_renormalize(const Graph& g);
SparseMatrix symmetric_renormalize(const SparseMatrix& adjacency);

/// Writes a dense matrix as tab-separated rows (features.tsv format).
void write_matrix_tsv(const DenseMatrix& m, const std::filesystem::path& path);
DenseMatrix read_matrix_tsv(const std::filesystem::path& path);

}  // namespace selfgnn
