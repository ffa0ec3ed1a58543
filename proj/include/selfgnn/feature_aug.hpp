#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "selfgnn/dense.hpp"
#include "selfgnn/graph.hpp"

namespace selfgnn {

/// A feature matrix produced by an augmentation, tagged with how it was made.
struct FeatureView {
  DenseMatrix matrix;
  std::string provenance;
};

/// Column halves: [0, ceil(F/2)) and [ceil(F/2), F).
std::pair<FeatureView, FeatureView> split_features(const DenseMatrix& x);

/// Per-column z-score with population standard deviation. Constant columns
/// become zero.
FeatureView standardize(const DenseMatrix& x);

/// Local degree profile: [deg, min, max, mean, std] of neighbour degrees.
DenseMatrix ldp(const Graph& g);

/// ldp(g) zero-padded to width f (f >= 5).
FeatureView ldp_padded(const Graph& g, int f);

/// ([X | 0], [X | LDP]), both of width F + 5.
std::pair<FeatureView, FeatureView> paste(const DenseMatrix& x, const Graph& g);

/// Output column j is input column perm[j].
DenseMatrix permute_features(const DenseMatrix& x, const std::vector<int>& perm);

/// Seeded random permutation of [0, f).
std::vector<int> random_feature_permutation(int f, std::uint64_t seed);

std::vector<int> inverse_permutation(const std::vector<int>& perm);

}  // namespace selfgnn
