#include "selfgnn/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>

#include <Eigen/SVD>

#include "selfgnn/errors.hpp"
#include "selfgnn/rng.hpp"

namespace selfgnn {

void ProbeConfig::validate() const {
  if (!(l2 >= 0.0)) throw ConfigError("probe.l2 must be >= 0");
  if (max_iter < 1) throw ConfigError("probe.max_iter must be >= 1");
  if (!(lr > 0.0)) throw ConfigError("probe.lr must be > 0");
  if (!(tol >= 0.0)) throw ConfigError("probe.tol must be >= 0");
  if (folds < 2) throw ConfigError("probe.folds must be >= 2");
  if (!(init_scale >= 0.0)) throw ConfigError("probe.init_scale must be >= 0");
}

namespace {

std::map<int, std::vector<int>> nodes_by_class(const std::vector<int>& labels) {
  std::map<int, std::vector<int>> out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= 0) out[labels[i]].push_back(static_cast<int>(i));
  }
  return out;
}

DenseMatrix select_rows(const DenseMatrix& m, const std::vector<int>& rows) {
  DenseMatrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
  return out;
}

int argmax_row(const DenseMatrix& scores, Eigen::Index r) {
  int best = 0;
  for (Eigen::Index c = 1; c < scores.cols(); ++c) {
    if (scores(r, c) > scores(r, best)) best = static_cast<int>(c);
  }
  return best;
}

double accuracy_of(const DenseMatrix& scores, const std::vector<int>& y, std::vector<int>* preds) {
  if (y.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const int p = argmax_row(scores, static_cast<Eigen::Index>(i));
    if (preds) preds->push_back(p);
    if (p == y[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(y.size());
}

}  // namespace

std::vector<SplitTag> stratified_split(const std::vector<int>& labels, std::uint64_t seed, double val_ratio,
                                       double test_ratio) {
  if (!(val_ratio >= 0.0 && test_ratio >= 0.0 && val_ratio + test_ratio < 1.0)) {
    throw ConfigError("stratified_split: ratios must be nonnegative and sum below 1");
  }
  std::vector<SplitTag> out(labels.size(), SplitTag::kNone);
  Rng rng = Rng::substream(seed, "split");
  for (auto& [cls, nodes] : nodes_by_class(labels)) {
    const auto n = static_cast<double>(nodes.size());
    if (nodes.size() < 3) {
      throw DataError("stratified_split: class " + std::to_string(cls) + " has " + std::to_string(nodes.size()) +
                      " labeled nodes (need >= 3)");
    }
    rng.shuffle(nodes);
    const auto n_val = static_cast<std::size_t>(std::floor(val_ratio * n + 0.5));
    const auto n_test = static_cast<std::size_t>(std::floor(test_ratio * n + 0.5));
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      SplitTag tag = SplitTag::kTrain;
      if (i < n_val) {
        tag = SplitTag::kVal;
      } else if (i < n_val + n_test) {
        tag = SplitTag::kTest;
      }
      out[static_cast<std::size_t>(nodes[i])] = tag;
    }
  }
  return out;
}

ProbeResult logistic_probe(const DenseMatrix& train_x, const std::vector<int>& train_y, const DenseMatrix& test_x,
                           const std::vector<int>& test_y, const ProbeConfig& cfg) {
  cfg.validate();
  const Eigen::Index n = train_x.rows();
  const Eigen::Index d = train_x.cols();
  if (static_cast<std::size_t>(n) != train_y.size() || static_cast<std::size_t>(test_x.rows()) != test_y.size()) {
    throw ConfigError("logistic_probe: label count does not match row count");
  }
  if (test_x.cols() != d) throw ConfigError("logistic_probe: train and test widths differ");
  if (n == 0) throw DataError("logistic_probe: empty training set");
  int num_classes = 0;
  for (int y : train_y) {
    if (y < 0) throw DataError("logistic_probe: unlabeled row in training set");
    num_classes = std::max(num_classes, y + 1);
  }
  for (int y : test_y) num_classes = std::max(num_classes, y + 1);
  {
    std::vector<int> sorted = train_y;
    std::sort(sorted.begin(), sorted.end());
    if (sorted.front() == sorted.back()) throw DataError("logistic_probe: training set has a single class");
  }

  const Eigen::RowVectorXd mean = train_x.colwise().mean();
  Eigen::RowVectorXd sd = ((train_x.rowwise() - mean).array().square().colwise().sum() / static_cast<double>(n)).sqrt();
  for (Eigen::Index j = 0; j < d; ++j) {
    if (!(sd(j) > 0.0)) sd(j) = 1.0;
  }
  const DenseMatrix xs = (train_x.rowwise() - mean).array().rowwise() / sd.array();
  const DenseMatrix ts = (test_x.rowwise() - mean).array().rowwise() / sd.array();

  DenseMatrix onehot = DenseMatrix::Zero(n, num_classes);
  for (Eigen::Index i = 0; i < n; ++i) onehot(i, train_y[static_cast<std::size_t>(i)]) = 1.0;

  DenseMatrix w = DenseMatrix::Zero(d, num_classes);
  Eigen::RowVectorXd b = Eigen::RowVectorXd::Zero(num_classes);
  if (cfg.init_scale > 0.0) {
    Rng rng = Rng::substream(cfg.seed, "probe-init");
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = rng.uniform(-cfg.init_scale, cfg.init_scale);
  }

  ProbeResult res;
  double prev = std::numeric_limits<double>::infinity();
  DenseMatrix probs(n, num_classes);
  for (int it = 0; it < cfg.max_iter; ++it) {
    DenseMatrix logits = (xs * w).rowwise() + b;
    double nll = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double mx = logits.row(i).maxCoeff();
      double z = 0.0;
      for (Eigen::Index c = 0; c < num_classes; ++c) {
        probs(i, c) = std::exp(logits(i, c) - mx);
        z += probs(i, c);
      }
      probs.row(i) /= z;
      nll += std::log(z) + mx - logits(i, train_y[static_cast<std::size_t>(i)]);
    }
    const double loss = nll / static_cast<double>(n) + 0.5 * cfg.l2 * w.squaredNorm();
    if (!std::isfinite(loss)) throw NumericError("logistic_probe: loss became non-finite");
    res.final_loss = loss;
    res.iterations = it + 1;
    if (std::abs(prev - loss) < cfg.tol) break;
    prev = loss;
    const DenseMatrix delta = (probs - onehot) / static_cast<double>(n);
    const DenseMatrix gw = xs.transpose() * delta + cfg.l2 * w;
    const Eigen::RowVectorXd gb = delta.colwise().sum();
    w -= cfg.lr * gw;
    b -= cfg.lr * gb;
  }
  res.train_accuracy = accuracy_of((xs * w).rowwise() + b, train_y, nullptr);
  res.accuracy = accuracy_of((ts * w).rowwise() + b, test_y, &res.predictions);
  return res;
}

ProbeResult split_probe(const DenseMatrix& emb, const std::vector<int>& labels, const std::vector<SplitTag>& split,
                        SplitTag fit, SplitTag score, const ProbeConfig& cfg) {
  if (labels.size() != static_cast<std::size_t>(emb.rows()) || split.size() != labels.size()) {
    throw DataError("split_probe: labels/split do not match embedding rows");
  }
  std::vector<int> fit_rows, score_rows, fit_y, score_y;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0) continue;
    if (split[i] == fit) {
      fit_rows.push_back(static_cast<int>(i));
      fit_y.push_back(labels[i]);
    } else if (split[i] == score) {
      score_rows.push_back(static_cast<int>(i));
      score_y.push_back(labels[i]);
    }
  }
  if (score_rows.empty()) throw DataError(std::string("split_probe: no labeled nodes tagged ") + to_string(score));
  return logistic_probe(select_rows(emb, fit_rows), fit_y, select_rows(emb, score_rows), score_y, cfg);
}

std::vector<int> stratified_folds(const std::vector<int>& labels, int folds, std::uint64_t seed) {
  if (folds < 2) throw ConfigError("stratified_folds: folds must be >= 2");
  std::vector<int> out(labels.size(), -1);
  Rng rng = Rng::substream(seed, "folds");
  std::size_t offset = 0;
  for (auto& [cls, nodes] : nodes_by_class(labels)) {
    if (nodes.size() < static_cast<std::size_t>(folds)) {
      throw ConfigError("stratified_folds: class " + std::to_string(cls) + " has fewer nodes than folds");
    }
    rng.shuffle(nodes);
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      out[static_cast<std::size_t>(nodes[i])] = static_cast<int>((offset + i) % static_cast<std::size_t>(folds));
    }
    offset += nodes.size();
  }
  return out;
}

KFoldResult kfold_accuracy(const DenseMatrix& emb, const std::vector<int>& labels, const ProbeConfig& cfg) {
  cfg.validate();
  if (labels.size() != static_cast<std::size_t>(emb.rows())) throw DataError("kfold_accuracy: label count mismatch");
  const auto fold = stratified_folds(labels, cfg.folds, cfg.seed);
  KFoldResult res;
  for (int f = 0; f < cfg.folds; ++f) {
    std::vector<int> tr, te, ytr, yte;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (fold[i] < 0) continue;
      if (fold[i] == f) {
        te.push_back(static_cast<int>(i));
        yte.push_back(labels[i]);
      } else {
        tr.push_back(static_cast<int>(i));
        ytr.push_back(labels[i]);
      }
    }
    const auto r = logistic_probe(select_rows(emb, tr), ytr, select_rows(emb, te), yte, cfg);
    res.fold_accuracy.push_back(r.accuracy);
    res.fold_size.push_back(static_cast<int>(te.size()));
  }
  const double k = static_cast<double>(cfg.folds);
  for (double a : res.fold_accuracy) res.mean += a;
  res.mean /= k;
  for (double a : res.fold_accuracy) res.std += (a - res.mean) * (a - res.mean);
  res.std = std::sqrt(res.std / k);
  return res;
}

CollapseMetrics collapse_metrics(const DenseMatrix& emb) {
  if (emb.rows() < 2) throw ConfigError("collapse_metrics: need at least 2 rows");
  CollapseMetrics m;
  const Eigen::RowVectorXd mean = emb.colwise().mean();
  m.dim_std = ((emb.rowwise() - mean).array().square().colwise().sum() / static_cast<double>(emb.rows()))
                  .sqrt()
                  .transpose();
  m.mean_std = m.dim_std.size() > 0 ? m.dim_std.mean() : 0.0;

  const Eigen::MatrixXd col_major = emb;
  Eigen::BDCSVD<Eigen::MatrixXd> svd(col_major);
  const Eigen::VectorXd s = svd.singularValues();
  const double total = s.sum();
  if (!(total > 0.0)) return m;
  const double floor = s.maxCoeff() * 1e-12;
  double entropy = 0.0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) <= floor) continue;
    const double p = s(i) / total;
    entropy -= p * std::log(p);
  }
  m.effective_rank = std::exp(entropy);
  return m;
}

}  // namespace selfgnn
