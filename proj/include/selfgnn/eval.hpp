#pragma once

#include <cstdint>
#include <vector>

#include "selfgnn/dense.hpp"
#include "selfgnn/graph.hpp"

namespace selfgnn {

struct ProbeConfig {
  double l2 = 1e-4;
  int max_iter = 500;
  double lr = 0.1;
  double tol = 1e-7;  // stop when the loss changes by less than this
  int folds = 5;
  std::uint64_t seed = 0;
  double init_scale = 0.0;  // > 0: weights start uniform in [-s, s] from the seed

  void validate() const;
};

struct ProbeResult {
  double accuracy = 0.0;        // on the evaluation rows
  double train_accuracy = 0.0;
  double final_loss = 0.0;
  int iterations = 0;
  std::vector<int> predictions;  // one per evaluation row
};

/// 70/10/20 per class (val = round(0.1 n), test = round(0.2 n), remainder to
/// train). Unlabeled nodes get kNone. Each class needs at least 3 nodes.
std::vector<SplitTag> stratified_split(const std::vector<int>& labels, std::uint64_t seed, double val_ratio = 0.1,
                                       double test_ratio = 0.2);

/// Multinomial logistic regression with L2 penalty, trained by full-batch
/// gradient descent on features standardized with training statistics.
ProbeResult logistic_probe(const DenseMatrix& train_x, const std::vector<int>& train_y, const DenseMatrix& test_x,
                           const std::vector<int>& test_y, const ProbeConfig& cfg);

/// Trains on rows tagged `fit` and scores rows tagged `score`.
ProbeResult split_probe(const DenseMatrix& emb, const std::vector<int>& labels, const std::vector<SplitTag>& split,
                        SplitTag fit, SplitTag score, const ProbeConfig& cfg);

/// Fold id per labeled node (-1 for unlabeled), stratified by class.
std::vector<int> stratified_folds(const std::vector<int>& labels, int folds, std::uint64_t seed);

struct KFoldResult {
  double mean = 0.0;
  double std = 0.0;  // population std over folds
  std::vector<double> fold_accuracy;
  std::vector<int> fold_size;
};

/// Stratified k-fold cross-validation over all labeled nodes.
KFoldResult kfold_accuracy(const DenseMatrix& emb, const std::vector<int>& labels, const ProbeConfig& cfg);

struct CollapseMetrics {
  DenseVector dim_std;
  double mean_std = 0.0;
  double effective_rank = 0.0;
};

/// Per-dimension population std and exp(entropy) of the normalized singular
/// values. An all-zero matrix has effective rank 0.
CollapseMetrics collapse_metrics(const DenseMatrix& emb);

}  // namespace selfgnn
