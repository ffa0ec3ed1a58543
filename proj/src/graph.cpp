#include "selfgnn/graph.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "selfgnn/io.hpp"

namespace selfgnn {

namespace fs = std::filesystem;

const char* to_string(SplitTag tag) {
  switch (tag) {
    case SplitTag::kTrain: return "train";
    case SplitTag::kVal: return "val";
    case SplitTag::kTest: return "test";
    case SplitTag::kNone: break;
  }
  return "none";
}

SplitTag parse_split_tag(const std::string& s) {
  if (s == "train") return SplitTag::kTrain;
  if (s == "val") return SplitTag::kVal;
  if (s == "test") return SplitTag::kTest;
  if (s == "none") return SplitTag::kNone;
  throw DataError("split.tsv: unknown tag '" + s + "'");
}

void Graph::validate() const {
  if (adjacency.rows() != num_nodes || adjacency.cols() != num_nodes) {
    throw DataError("graph: adjacency is not num_nodes x num_nodes");
  }
  adjacency.validate();
  if (!adjacency.is_symmetric()) throw DataError("graph: adjacency is not symmetric");
  for (int i = 0; i < num_nodes; ++i) {
    if (adjacency.at(i, i) != 0.0) throw DataError("graph: self-loop at node " + std::to_string(i));
  }
  if (features.rows() != num_nodes) throw DataError("graph: feature row count != num_nodes");
  if (!features.allFinite()) throw DataError("graph: non-finite feature value");
  if (has_labels() && static_cast<int>(labels.size()) != num_nodes) throw DataError("graph: label count != num_nodes");
  if (has_split() && static_cast<int>(split.size()) != num_nodes) throw DataError("graph: split count != num_nodes");
}

SparseMatrix adjacency_from_edges(int num_nodes, const std::vector<std::pair<int, int>>& edges) {
  std::vector<Triplet> t;
  t.reserve(edges.size() * 2);
  for (auto [u, v] : edges) {
    if (u < 0 || u >= num_nodes || v < 0 || v >= num_nodes) {
      throw DataError("edge (" + std::to_string(u) + "," + std::to_string(v) + ") out of range [0," +
                      std::to_string(num_nodes) + ")");
    }
    if (u == v) continue;
    t.push_back({u, v, 1.0});
    t.push_back({v, u, 1.0});
  }
  SparseMatrix summed = SparseMatrix::from_triplets(num_nodes, num_nodes, std::move(t));
  // Duplicates were summed; reset every stored weight to 1.
  std::vector<double> ones(summed.values().size(), 1.0);
  return SparseMatrix(num_nodes, num_nodes, summed.row_ptr(), summed.col_idx(), std::move(ones));
}

namespace {

std::vector<std::string> data_lines(const fs::path& path) {
  auto lines = io::read_lines(path);
  while (!lines.empty() && io::trim(lines.back()).empty()) lines.pop_back();
  return lines;
}

}  // namespace

Graph load_graph_bundle(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("dataset directory not found: " + dir.string());
  for (const char* name : {"graph.tsv", "features.tsv", "meta.tsv"}) {
    if (!fs::exists(dir / name)) throw DataError("missing bundle file: " + (dir / name).string());
  }

  std::map<std::string, long long> meta;
  for (const auto& line : io::read_lines(dir / "meta.tsv")) {
    const auto s = io::trim(line);
    if (s.empty() || s.front() == '#') continue;
    const auto cols = io::split_tabs(s);
    if (cols.size() < 2) throw DataError("meta.tsv: expected key<TAB>value, got '" + std::string(s) + "'");
    meta[std::string(io::trim(cols[0]))] = io::parse_int(cols[1], "meta.tsv");
  }
  if (!meta.contains("num_nodes") || !meta.contains("num_features")) {
    throw DataError("meta.tsv: num_nodes and num_features are required");
  }
  Graph g;
  g.num_nodes = static_cast<int>(meta["num_nodes"]);
  const auto num_features = static_cast<int>(meta["num_features"]);
  if (g.num_nodes < 1 || num_features < 1) throw DataError("meta.tsv: counts must be positive");

  std::vector<std::pair<int, int>> edges;
  for (const auto& line : io::read_lines(dir / "graph.tsv")) {
    const auto s = io::trim(line);
    if (s.empty() || s.front() == '#') continue;
    const auto cols = io::split_tabs(s);
    if (cols.size() < 2) throw DataError("graph.tsv: expected u<TAB>v, got '" + std::string(s) + "'");
    const auto u = io::parse_int(cols[0], "graph.tsv");
    const auto v = io::parse_int(cols[1], "graph.tsv");
    if (u < 0 || u >= g.num_nodes || v < 0 || v >= g.num_nodes) {
      throw DataError("graph.tsv: node index out of range in '" + std::string(s) + "'");
    }
    edges.emplace_back(static_cast<int>(u), static_cast<int>(v));
  }
  g.adjacency = adjacency_from_edges(g.num_nodes, edges);

  const auto feat_lines = data_lines(dir / "features.tsv");
  if (static_cast<int>(feat_lines.size()) != g.num_nodes) {
    throw DataError("features.tsv: " + std::to_string(feat_lines.size()) + " rows, expected " +
                    std::to_string(g.num_nodes));
  }
  g.features.resize(g.num_nodes, num_features);
  for (int i = 0; i < g.num_nodes; ++i) {
    const auto cols = io::split_tabs(feat_lines[static_cast<std::size_t>(i)]);
    if (static_cast<int>(cols.size()) != num_features) {
      throw DataError("features.tsv: row " + std::to_string(i) + " has " + std::to_string(cols.size()) +
                      " columns, expected " + std::to_string(num_features));
    }
    for (int j = 0; j < num_features; ++j) g.features(i, j) = io::parse_double(cols[static_cast<std::size_t>(j)], "features.tsv");
  }

  int max_label = -1;
  if (fs::exists(dir / "labels.tsv")) {
    const auto lines = data_lines(dir / "labels.tsv");
    if (static_cast<int>(lines.size()) != g.num_nodes) throw DataError("labels.tsv: row count != num_nodes");
    g.labels.reserve(lines.size());
    for (const auto& l : lines) {
      const auto y = io::parse_int(l, "labels.tsv");
      if (y < -1) throw DataError("labels.tsv: label must be >= -1");
      g.labels.push_back(static_cast<int>(y));
      max_label = std::max(max_label, static_cast<int>(y));
    }
  }
  g.num_classes = meta.contains("num_classes") ? static_cast<int>(meta["num_classes"]) : max_label + 1;
  if (max_label >= g.num_classes) throw DataError("labels.tsv: label exceeds num_classes");

  if (fs::exists(dir / "split.tsv")) {
    const auto lines = data_lines(dir / "split.tsv");
    if (static_cast<int>(lines.size()) != g.num_nodes) throw DataError("split.tsv: row count != num_nodes");
    g.split.reserve(lines.size());
    for (const auto& l : lines) g.split.push_back(parse_split_tag(std::string(io::trim(l))));
  }
  g.validate();
  return g;
}

void write_matrix_tsv(const DenseMatrix& m, const fs::path& path) {
  std::string out;
  out.reserve(static_cast<std::size_t>(m.size()) * 4);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out += '\t';
      out += io::format_double(m(i, j));
    }
    out += '\n';
  }
  io::write_text(path, out);
}

DenseMatrix read_matrix_tsv(const fs::path& path) {
  const auto lines = data_lines(path);
  if (lines.empty()) return {};
  const auto width = io::split_tabs(lines.front()).size();
  DenseMatrix m(static_cast<Eigen::Index>(lines.size()), static_cast<Eigen::Index>(width));
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto cols = io::split_tabs(lines[i]);
    if (cols.size() != width) throw DataError(path.string() + ": ragged row " + std::to_string(i));
    for (std::size_t j = 0; j < width; ++j) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = io::parse_double(cols[j], path.filename().string());
    }
  }
  return m;
}

void save_graph_bundle(const Graph& g, const fs::path& dir) {
  fs::create_directories(dir);
  std::ostringstream edges;
  const auto& rp = g.adjacency.row_ptr();
  const auto& ci = g.adjacency.col_idx();
  for (int i = 0; i < g.num_nodes; ++i) {
    for (auto k = rp[static_cast<std::size_t>(i)]; k < rp[static_cast<std::size_t>(i) + 1]; ++k) {
      const int j = ci[static_cast<std::size_t>(k)];
      if (i < j) edges << i << '\t' << j << '\n';
    }
  }
  io::write_text(dir / "graph.tsv", edges.str());
  write_matrix_tsv(g.features, dir / "features.tsv");
  std::ostringstream meta;
  meta << "num_nodes\t" << g.num_nodes << "\nnum_features\t" << g.num_features() << "\nnum_classes\t"
       << g.num_classes << '\n';
  io::write_text(dir / "meta.tsv", meta.str());
  if (g.has_labels()) {
    std::ostringstream s;
    for (int y : g.labels) s << y << '\n';
    io::write_text(dir / "labels.tsv", s.str());
  }
  if (g.has_split()) {
    std::ostringstream s;
    for (auto t : g.split) s << to_string(t) << '\n';
    io::write_text(dir / "split.tsv", s.str());
  }
}

DenseVector degree_vector(const Graph& g) { return g.adjacency.row_sums(); }

SparseMatrix symmetric_renormalize(const SparseMatrix& a) {
  const int n = a.rows();
  DenseVector deg = a.row_sums();
  deg.array() += 1.0;
  std::vector<std::int64_t> rp(static_cast<std::size_t>(n) + 1, 0);
  std::vector<int> ci;
  std::vector<double> vals;
  ci.reserve(static_cast<std::size_t>(a.nnz() + n));
  vals.reserve(static_cast<std::size_t>(a.nnz() + n));
  const auto& arp = a.row_ptr();
  const auto& aci = a.col_idx();
  for (int i = 0; i < n; ++i) {
    bool diag_done = false;
    auto emit = [&](int j) {
      ci.push_back(j);
      // d_i * d_j commutes exactly, so (i,j) and (j,i) get identical bits.
      vals.push_back(1.0 / std::sqrt(deg[i] * deg[j]));
    };
    for (auto k = arp[static_cast<std::size_t>(i)]; k < arp[static_cast<std::size_t>(i) + 1]; ++k) {
      const int j = aci[static_cast<std::size_t>(k)];
      if (!diag_done && j > i) {
        emit(i);
        diag_done = true;
      }
      if (j != i) emit(j);
    }
    if (!diag_done) emit(i);
    rp[static_cast<std::size_t>(i) + 1] = static_cast<std::int64_t>(ci.size());
  }
  return SparseMatrix(n, n, std::move(rp), std::move(ci), std::move(vals));
}

SparseMatrix symmetric_renormalize(const Graph& g) { return symmetric_renormalize(g.adjacency); }

}  // namespace selfgnn
