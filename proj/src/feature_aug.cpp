#include "selfgnn/feature_aug.hpp"

#include <algorithm>
#include <cmath>

#include "selfgnn/errors.hpp"
#include "selfgnn/rng.hpp"

namespace selfgnn {

std::pair<FeatureView, FeatureView> split_features(const DenseMatrix& x) {
  const auto f = x.cols();
  if (f < 2) throw ConfigError("split: need at least 2 feature columns, got " + std::to_string(f));
  const auto first = (f + 1) / 2;
  return {FeatureView{x.leftCols(first), "split:first"}, FeatureView{x.rightCols(f - first), "split:second"}};
}

FeatureView standardize(const DenseMatrix& x) {
  const auto n = static_cast<double>(x.rows());
  DenseMatrix out(x.rows(), x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const auto col = x.col(j);
    const double mean = col.sum() / n;
    const double var = (col.array() - mean).square().sum() / n;
    const double sd = std::sqrt(var);
    if (sd > 0.0) {
      out.col(j) = (col.array() - mean) / sd;
    } else {
      out.col(j).setZero();
    }
  }
  return {std::move(out), "standardize"};
}

DenseMatrix ldp(const Graph& g) {
  const DenseVector deg = degree_vector(g);
  DenseMatrix out = DenseMatrix::Zero(g.num_nodes, 5);
  const auto& rp = g.adjacency.row_ptr();
  const auto& ci = g.adjacency.col_idx();
  for (int i = 0; i < g.num_nodes; ++i) {
    const auto b = rp[static_cast<std::size_t>(i)];
    const auto e = rp[static_cast<std::size_t>(i) + 1];
    if (b == e) continue;
    double mn = INFINITY, mx = -INFINITY, sum = 0.0;
    for (auto k = b; k < e; ++k) {
      const double d = deg[ci[static_cast<std::size_t>(k)]];
      mn = std::min(mn, d);
      mx = std::max(mx, d);
      sum += d;
    }
    const double cnt = static_cast<double>(e - b);
    const double mean = sum / cnt;
    double ss = 0.0;
    for (auto k = b; k < e; ++k) {
      const double diff = deg[ci[static_cast<std::size_t>(k)]] - mean;
      ss += diff * diff;
    }
    out.row(i) << deg[i], mn, mx, mean, std::sqrt(ss / cnt);
  }
  return out;
}

FeatureView ldp_padded(const Graph& g, int f) {
  if (f < 5) throw ConfigError("ldp_padded: width must be >= 5, got " + std::to_string(f));
  DenseMatrix out = DenseMatrix::Zero(g.num_nodes, f);
  out.leftCols(5) = ldp(g);
  return {std::move(out), "ldp"};
}

std::pair<FeatureView, FeatureView> paste(const DenseMatrix& x, const Graph& g) {
  if (x.rows() != g.num_nodes) throw ConfigError("paste: feature rows != num_nodes");
  const auto f = x.cols();
  DenseMatrix plain = DenseMatrix::Zero(x.rows(), f + 5);
  plain.leftCols(f) = x;
  DenseMatrix pasted = plain;
  pasted.rightCols(5) = ldp(g);
  return {FeatureView{std::move(plain), "paste:zero"}, FeatureView{std::move(pasted), "paste:ldp"}};
}

std::vector<int> inverse_permutation(const std::vector<int>& perm) {
  std::vector<int> inv(perm.size(), -1);
  for (std::size_t j = 0; j < perm.size(); ++j) {
    const int p = perm[j];
    if (p < 0 || static_cast<std::size_t>(p) >= perm.size() || inv[static_cast<std::size_t>(p)] != -1) {
      throw ConfigError("permutation is not a bijection");
    }
    inv[static_cast<std::size_t>(p)] = static_cast<int>(j);
  }
  return inv;
}

DenseMatrix permute_features(const DenseMatrix& x, const std::vector<int>& perm) {
  if (static_cast<Eigen::Index>(perm.size()) != x.cols()) throw ConfigError("permute_features: permutation length != F");
  inverse_permutation(perm);  // validates
  DenseMatrix out(x.rows(), x.cols());
  for (std::size_t j = 0; j < perm.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = x.col(perm[j]);
  return out;
}

std::vector<int> random_feature_permutation(int f, std::uint64_t seed) {
  auto rng = Rng::substream(seed, "feature-perm");
  return rng.permutation(f);
}

}  // namespace selfgnn
