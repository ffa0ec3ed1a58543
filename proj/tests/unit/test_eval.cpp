#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "selfgnn/eval.hpp"
#include "gradcheck.hpp"

using namespace selfgnn;
namespace st = selfgnn::testing;

namespace {

struct Toy {
  DenseMatrix x;
  std::vector<int> y;
};

Toy gaussians(int per_class, double gap, Rng& rng) {
  Toy t;
  t.x.resize(2 * per_class, 2);
  for (int i = 0; i < 2 * per_class; ++i) {
    const int c = i % 2;
    t.y.push_back(c);
    t.x(i, 0) = rng.normal() + (c ? gap : -gap);
    t.x(i, 1) = rng.normal();
  }
  return t;
}

}  // namespace

TEST(Split, BalancedExactCounts) {
  std::vector<int> labels(100);
  for (int i = 0; i < 100; ++i) labels[i] = i % 2;
  const auto s = stratified_split(labels, 3);
  int counts[2][4] = {};
  for (int i = 0; i < 100; ++i) ++counts[labels[i]][static_cast<int>(s[i])];
  for (int c = 0; c < 2; ++c) {
    EXPECT_EQ(counts[c][static_cast<int>(SplitTag::kTrain)], 35);
    EXPECT_EQ(counts[c][static_cast<int>(SplitTag::kVal)], 5);
    EXPECT_EQ(counts[c][static_cast<int>(SplitTag::kTest)], 10);
  }
  EXPECT_EQ(stratified_split(labels, 3), s);
  EXPECT_NE(stratified_split(labels, 4), s);
}

TEST(Split, TrainFractionWithinOneNode) {
  Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<int> labels;
    const int classes = 2 + static_cast<int>(rng.below(5));
    std::vector<int> sizes(classes);
    for (int c = 0; c < classes; ++c) {
      sizes[c] = 3 + static_cast<int>(rng.below(60));
      for (int i = 0; i < sizes[c]; ++i) labels.push_back(c);
    }
    labels.push_back(-1);
    rng.shuffle(labels);
    const auto s = stratified_split(labels, trial);
    std::vector<int> train(classes, 0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] < 0) {
        EXPECT_EQ(s[i], SplitTag::kNone);
        continue;
      }
      EXPECT_NE(s[i], SplitTag::kNone);
      if (s[i] == SplitTag::kTrain) ++train[labels[i]];
    }
    for (int c = 0; c < classes; ++c) EXPECT_LE(std::abs(train[c] - 0.7 * sizes[c]), 1.0);
  }
}

TEST(Split, TinyClassIsDataError) {
  EXPECT_THROW(stratified_split({0, 0, 0, 1, 1}, 0), DataError);
}

TEST(Probe, SeparableToy) {
  Rng rng(2);
  const Toy train = gaussians(100, 6.0, rng);
  const Toy test = gaussians(100, 6.0, rng);
  const ProbeResult r = logistic_probe(train.x, train.y, test.x, test.y, ProbeConfig{});
  EXPECT_EQ(r.accuracy, 1.0);
  EXPECT_GE(r.train_accuracy, r.accuracy);
  EXPECT_EQ(r.predictions.size(), 200u);
}

TEST(Probe, ShuffledLabelsNearChance) {
  Rng rng(3);
  Toy train = gaussians(500, 0.0, rng);
  Toy test = gaussians(500, 0.0, rng);
  rng.shuffle(train.y);
  rng.shuffle(test.y);
  const ProbeResult r = logistic_probe(train.x, train.y, test.x, test.y, ProbeConfig{});
  EXPECT_GE(r.accuracy, 0.4);
  EXPECT_LE(r.accuracy, 0.6);
}

TEST(Probe, ConvexSoInitDoesNotMatter) {
  Rng rng(4);
  const Toy train = gaussians(80, 1.0, rng);
  const Toy test = gaussians(80, 1.0, rng);
  ProbeConfig a;
  a.max_iter = 5000;
  a.tol = 1e-12;
  ProbeConfig b = a;
  b.init_scale = 0.5;
  b.seed = 17;
  const auto ra = logistic_probe(train.x, train.y, test.x, test.y, a);
  const auto rb = logistic_probe(train.x, train.y, test.x, test.y, b);
  EXPECT_NEAR(ra.accuracy, rb.accuracy, 1e-4);
  EXPECT_NEAR(ra.final_loss, rb.final_loss, 1e-4);
}

TEST(Probe, SingleClassTrainingIsDataError) {
  const DenseMatrix x = DenseMatrix::Ones(4, 2);
  EXPECT_THROW(logistic_probe(x, {1, 1, 1, 1}, x, {0, 1, 0, 1}, ProbeConfig{}), DataError);
}

TEST(Probe, TiesGoToLowestClass) {
  // Constant features carry no signal; with balanced classes the learned
  // biases stay equal and every prediction ties.
  const DenseMatrix x = DenseMatrix::Zero(4, 2);
  const ProbeResult r = logistic_probe(x, {0, 1, 0, 1}, x, {0, 1, 0, 1}, ProbeConfig{});
  for (int p : r.predictions) EXPECT_EQ(p, 0);
  EXPECT_EQ(r.accuracy, 0.5);
}

TEST(Folds, TwoFoldsTestEachPointOnce) {
  std::vector<int> labels{0, 1, 0, 1, 0, 1, 0, 1, 0, 1};
  const auto f = stratified_folds(labels, 2, 0);
  int counts[2] = {};
  for (int v : f) {
    ASSERT_GE(v, 0);
    ASSERT_LT(v, 2);
    ++counts[v];
  }
  EXPECT_EQ(counts[0], 5);
  EXPECT_EQ(counts[1], 5);
  EXPECT_THROW(stratified_folds({0, 0, 1}, 2, 0), ConfigError);
}

TEST(KFold, EqualFoldsMeanIsPooledAccuracy) {
  Rng rng(5);
  const Toy t = gaussians(50, 0.8, rng);
  ProbeConfig cfg;
  cfg.folds = 5;
  const KFoldResult r = kfold_accuracy(t.x, t.y, cfg);
  ASSERT_EQ(r.fold_size.size(), 5u);
  int total = 0;
  double correct = 0.0;
  for (std::size_t k = 0; k < 5; ++k) {
    EXPECT_EQ(r.fold_size[k], 20);
    total += r.fold_size[k];
    correct += r.fold_accuracy[k] * r.fold_size[k];
  }
  EXPECT_EQ(total, 100);
  EXPECT_NEAR(r.mean, correct / total, 1e-12);
  double var = 0.0;
  for (double a : r.fold_accuracy) var += (a - r.mean) * (a - r.mean);
  EXPECT_NEAR(r.std, std::sqrt(var / 5.0), 1e-12);
}

TEST(KFold, IdenticalFoldsZeroStd) {
  Rng rng(6);
  const Toy t = gaussians(50, 8.0, rng);
  const KFoldResult r = kfold_accuracy(t.x, t.y, ProbeConfig{});
  EXPECT_EQ(r.mean, 1.0);
  EXPECT_EQ(r.std, 0.0);
}

TEST(Collapse, IdenticalRows) {
  DenseMatrix e(6, 3);
  e.rowwise() = Eigen::RowVector3d(1.0, -2.0, 0.5);
  const auto m = collapse_metrics(e);
  EXPECT_EQ(m.mean_std, 0.0);
  EXPECT_NEAR(m.effective_rank, 1.0, 1e-12);
  EXPECT_THROW(collapse_metrics(DenseMatrix::Ones(1, 3)), ConfigError);
}

TEST(Collapse, OrthonormalRows) {
  Rng rng(7);
  const Eigen::MatrixXd g = st::random_matrix(12, 12, rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  const Eigen::MatrixXd q = qr.householderQ();
  const DenseMatrix rows = q.topRows(5);  // 5 orthonormal rows in 12 dims
  EXPECT_NEAR(collapse_metrics(rows).effective_rank, 5.0, 1e-9);
}

TEST(Collapse, ScaleHomogeneity) {
  Rng rng(8);
  const DenseMatrix e = st::random_matrix(30, 6, rng);
  const auto a = collapse_metrics(e);
  const auto b = collapse_metrics(DenseMatrix(-3.0 * e));
  EXPECT_LT((b.dim_std - 3.0 * a.dim_std).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_NEAR(b.effective_rank, a.effective_rank, 1e-9);
}
