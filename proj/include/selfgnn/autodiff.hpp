#pragma once

// Minimal reverse-mode differentiation over dense row-major matrices.
//
// A Tape owns every value produced during one forward pass. Ops append a node
// holding the forward value and, when any input requires a gradient, a
// closure that pushes the output gradient back into its inputs. Gradients are
// allocated lazily, so nodes that never receive one (constants, the teacher's
// forward pass) never own a gradient buffer.

#include <array>
#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "selfgnn/dense.hpp"
#include "selfgnn/errors.hpp"
#include "selfgnn/rng.hpp"
#include "selfgnn/sparse.hpp"

namespace selfgnn::ad {

template <typename T>
using Matrix = RowMatrix<T>;

enum class Mode { kTrain, kEval };
enum class LossMode { kMatrix, kPerNode };

template <typename T>
class Tape;

/// Handle to a value recorded on a tape.
template <typename T>
struct Tensor {
  Tape<T>* tape = nullptr;
  int id = -1;

  const Matrix<T>& value() const { return tape->value(*this); }
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  bool requires_grad() const { return tape->requires_grad(*this); }
};

template <typename T>
class Tape {
 public:
  /// Called with the tape and the op's own output handle.
  using Backward = std::function<void(Tape&, Tensor<T>)>;

  Tensor<T> leaf(Matrix<T> value, bool requires_grad = true) {
    return push(std::move(value), requires_grad, nullptr, "leaf");
  }
  Tensor<T> constant(Matrix<T> value) { return push(std::move(value), false, nullptr, "constant"); }

  const Matrix<T>& value(Tensor<T> t) const { return node(t).value; }
  bool requires_grad(Tensor<T> t) const { return node(t).requires_grad; }
  bool has_grad(Tensor<T> t) const { return node(t).grad.size() > 0; }

  /// Gradient buffer of t; zero-initialized on first access.
  Matrix<T>& grad(Tensor<T> t) {
    auto& n = nodes_.at(static_cast<std::size_t>(t.id));
    if (n.grad.size() == 0) n.grad = Matrix<T>::Zero(n.value.rows(), n.value.cols());
    return n.grad;
  }

  /// Adds g into t's gradient when t participates in differentiation.
  template <typename Expr>
  void accumulate(Tensor<T> t, const Expr& g) {
    if (!requires_grad(t)) return;
    grad(t).noalias() += g;
  }

  /// Seeds d(loss)/d(loss) = 1 and runs each recorded closure once, in
  /// reverse execution order. Forward values are never modified.
  void backward(Tensor<T> loss) {
    if (backward_done_) throw Error("Tape::backward called twice");
    if (value(loss).size() != 1) throw ConfigError("Tape::backward: loss must be a scalar");
    backward_done_ = true;
    if (!requires_grad(loss)) return;
    grad(loss)(0, 0) = T(1);
    for (int id = loss.id; id >= 0; --id) {
      auto& n = nodes_[static_cast<std::size_t>(id)];
      if (n.backward && n.grad.size() > 0) {
        // Closures allocate gradient buffers but never append nodes.
        n.backward(*this, Tensor<T>{this, id});
      }
    }
  }

  std::size_t size() const { return nodes_.size(); }
  const std::string& op_name(int id) const { return nodes_.at(static_cast<std::size_t>(id)).op; }
  bool has_grad(int id) const { return nodes_.at(static_cast<std::size_t>(id)).grad.size() > 0; }

  /// Appends an op result. `backward` is dropped when the output needs no gradient.
  Tensor<T> push(Matrix<T> value, bool requires_grad, Backward backward, const char* op) {
    if (!value.allFinite()) throw NumericError(std::string(op) + ": non-finite result");
    nodes_.push_back(Node{std::move(value), Matrix<T>(), requires_grad,
                          requires_grad ? std::move(backward) : Backward(), op});
    return Tensor<T>{this, static_cast<int>(nodes_.size()) - 1};
  }

 private:
  struct Node {
    Matrix<T> value;
    Matrix<T> grad;
    bool requires_grad = false;
    Backward backward;
    std::string op;
  };

  const Node& node(Tensor<T> t) const { return nodes_.at(static_cast<std::size_t>(t.id)); }

  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

namespace detail {

template <typename T>
void same_tape(Tensor<T> a, Tensor<T> b, const char* op) {
  if (a.tape != b.tape) throw ConfigError(std::string(op) + ": operands recorded on different tapes");
}

inline std::string shape(Eigen::Index r, Eigen::Index c) { return std::to_string(r) + "x" + std::to_string(c); }

}  // namespace detail

template <typename T>
Tensor<T> matmul(Tensor<T> a, Tensor<T> b) {
  detail::same_tape(a, b, "matmul");
  if (a.cols() != b.rows()) {
    throw ConfigError("matmul: shape mismatch " + detail::shape(a.rows(), a.cols()) + " * " +
                      detail::shape(b.rows(), b.cols()));
  }
  Matrix<T> out;
  out.noalias() = a.value() * b.value();
  return a.tape->push(std::move(out), a.requires_grad() || b.requires_grad(),
                      [a, b](Tape<T>& t, Tensor<T> self) {
                        const Matrix<T>& g = t.grad(self);
                        if (t.requires_grad(a)) t.accumulate(a, g * t.value(b).transpose());
                        if (t.requires_grad(b)) t.accumulate(b, t.value(a).transpose() * g);
                      },
                      "matmul");
}

/// x (n x f) + b (1 x f) broadcast over rows.
template <typename T>
Tensor<T> add_bias(Tensor<T> x, Tensor<T> b) {
  detail::same_tape(x, b, "add_bias");
  if (b.rows() != 1 || b.cols() != x.cols()) {
    throw ConfigError("add_bias: bias " + detail::shape(b.rows(), b.cols()) + " does not match " +
                      detail::shape(x.rows(), x.cols()));
  }
  Matrix<T> out = x.value().rowwise() + b.value().row(0);
  return x.tape->push(std::move(out), x.requires_grad() || b.requires_grad(),
                      [x, b](Tape<T>& t, Tensor<T> self) {
                        const Matrix<T>& g = t.grad(self);
                        t.accumulate(x, g);
                        if (t.requires_grad(b)) t.accumulate(b, g.colwise().sum());
                      },
                      "add_bias");
}

template <typename T>
Tensor<T> add(Tensor<T> a, Tensor<T> b) {
  detail::same_tape(a, b, "add");
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ConfigError("add: shape mismatch");
  Matrix<T> out = a.value() + b.value();
  return a.tape->push(std::move(out), a.requires_grad() || b.requires_grad(),
                      [a, b](Tape<T>& t, Tensor<T> self) {
                        t.accumulate(a, t.grad(self));
                        t.accumulate(b, t.grad(self));
                      },
                      "add");
}

template <typename T>
Tensor<T> scale(Tensor<T> a, T s) {
  Matrix<T> out = a.value() * s;
  return a.tape->push(std::move(out), a.requires_grad(),
                      [a, s](Tape<T>& t, Tensor<T> self) { t.accumulate(a, t.grad(self) * s); }, "scale");
}

/// sum(x .* w) for a constant weight matrix w; a scalar probe used by tests
/// and gradient checks.
template <typename T>
Tensor<T> sum_product(Tensor<T> x, const Matrix<T>& w) {
  if (w.rows() != x.rows() || w.cols() != x.cols()) throw ConfigError("sum_product: shape mismatch");
  Matrix<T> out(1, 1);
  out(0, 0) = x.value().cwiseProduct(w).sum();
  return x.tape->push(std::move(out), x.requires_grad(),
                      [x, w](Tape<T>& t, Tensor<T> self) { t.accumulate(x, w * t.grad(self)(0, 0)); },
                      "sum_product");
}

/// max(x, 0). The gradient is passed only where x > 0.
template <typename T>
Tensor<T> relu(Tensor<T> x) {
  Matrix<T> out = x.value().cwiseMax(T(0));
  return x.tape->push(std::move(out), x.requires_grad(),
                      [x](Tape<T>& t, Tensor<T> self) {
                        const auto& in = t.value(x);
                        t.accumulate(x, (in.array() > T(0)).select(t.grad(self), T(0)).matrix());
                      },
                      "relu");
}

/// x where x > 0, slope * x elsewhere; slope is a learned 1x1 tensor.
template <typename T>
Tensor<T> prelu(Tensor<T> x, Tensor<T> slope) {
  detail::same_tape(x, slope, "prelu");
  if (slope.value().size() != 1) throw ConfigError("prelu: slope must be 1x1");
  const T a = slope.value()(0, 0);
  Matrix<T> out = (x.value().array() > T(0)).select(x.value(), x.value() * a);
  return x.tape->push(std::move(out), x.requires_grad() || slope.requires_grad(),
                      [x, slope](Tape<T>& t, Tensor<T> self) {
                        const auto& in = t.value(x);
                        const auto& g = t.grad(self);
                        const T a = t.value(slope)(0, 0);
                        const auto pos = (in.array() > T(0));
                        if (t.requires_grad(x)) t.accumulate(x, pos.select(g, g * a).matrix());
                        if (t.requires_grad(slope)) {
                          Matrix<T> ds(1, 1);
                          ds(0, 0) = pos.select(T(0), in.cwiseProduct(g)).sum();
                          t.accumulate(slope, ds);
                        }
                      },
                      "prelu");
}

/// Sparse propagation operator with its transpose prepared for backward.
struct FixedOperator {
  SparseMatrix forward;
  SparseMatrix transposed;  // empty when forward is symmetric
  bool symmetric = false;

  explicit FixedOperator(SparseMatrix s) : forward(std::move(s)) {
    symmetric = forward.rows() == forward.cols() && forward.is_symmetric();
    if (!symmetric) transposed = forward.transpose();
  }
  const SparseMatrix& backward_matrix() const { return symmetric ? forward : transposed; }
};

/// S x for a constant operator S; the gradient reaches x only (S^T g).
/// `op` must outlive the tape's backward pass.
template <typename T>
Tensor<T> spmm_fixed(const FixedOperator& op, Tensor<T> x) {
  if (op.forward.cols() != x.rows()) {
    throw ConfigError("spmm_fixed: operator " + detail::shape(op.forward.rows(), op.forward.cols()) +
                      " does not match input " + detail::shape(x.rows(), x.cols()));
  }
  Matrix<T> out = spmm<T>(op.forward, x.value());
  const FixedOperator* opp = &op;
  return x.tape->push(std::move(out), x.requires_grad(),
                      [x, opp](Tape<T>& t, Tensor<T> self) {
                        t.accumulate(x, spmm<T>(opp->backward_matrix(), t.grad(self)));
                      },
                      "spmm_fixed");
}

/// Batch-norm parameters and running statistics for one feature width.
template <typename T>
struct BatchNormState {
  Matrix<T> gamma;         // 1 x f, learned
  Matrix<T> beta;          // 1 x f, learned
  Matrix<T> running_mean;  // 1 x f
  Matrix<T> running_var;   // 1 x f
  T epsilon = T(1e-5);
  T momentum = T(0.1);

  static BatchNormState init(Eigen::Index f) {
    BatchNormState s;
    s.gamma = Matrix<T>::Ones(1, f);
    s.beta = Matrix<T>::Zero(1, f);
    s.running_mean = Matrix<T>::Zero(1, f);
    s.running_var = Matrix<T>::Ones(1, f);
    return s;
  }
  Eigen::Index width() const { return gamma.cols(); }
};

/// Train mode normalizes with batch statistics (population variance) and
/// updates the running estimates with r <- (1 - m) r + m * stat, using the
/// unbiased batch variance for running_var. Eval mode uses the running
/// estimates. gamma/beta are the tensors holding st.gamma/st.beta.
template <typename T>
Tensor<T> batch_norm(Tensor<T> x, Tensor<T> gamma, Tensor<T> beta, BatchNormState<T>& st, Mode mode) {
  detail::same_tape(x, gamma, "batch_norm");
  detail::same_tape(x, beta, "batch_norm");
  const Eigen::Index n = x.rows();
  const Eigen::Index f = x.cols();
  if (gamma.cols() != f || beta.cols() != f || st.width() != f) throw ConfigError("batch_norm: width mismatch");
  const bool needs = x.requires_grad() || gamma.requires_grad() || beta.requires_grad();

  Matrix<T> inv_std(1, f);
  Matrix<T> xhat(n, f);
  if (mode == Mode::kTrain) {
    if (n < 2) throw ConfigError("batch_norm: train mode needs at least 2 rows, got " + std::to_string(n));
    const Matrix<T>& in = x.value();
    Matrix<T> mean = in.colwise().mean();
    xhat = in.rowwise() - mean.row(0);
    Matrix<T> var = xhat.array().square().colwise().sum() / static_cast<T>(n);
    inv_std = (var.array() + st.epsilon).rsqrt();
    xhat.array().rowwise() *= inv_std.array().row(0);
    const T m = st.momentum;
    const T unbias = static_cast<T>(n) / static_cast<T>(n - 1);
    st.running_mean = (T(1) - m) * st.running_mean + m * mean;
    st.running_var = (T(1) - m) * st.running_var + (m * unbias) * var;
  } else {
    inv_std = (st.running_var.array() + st.epsilon).rsqrt();
    xhat = x.value().rowwise() - st.running_mean.row(0);
    xhat.array().rowwise() *= inv_std.array().row(0);
  }
  Matrix<T> out = xhat;
  out.array().rowwise() *= gamma.value().array().row(0);
  out.rowwise() += beta.value().row(0);

  if (!needs) return x.tape->push(std::move(out), false, nullptr, "batch_norm");
  auto saved = std::make_shared<std::pair<Matrix<T>, Matrix<T>>>(std::move(xhat), std::move(inv_std));
  return x.tape->push(
      std::move(out), true,
      [x, gamma, beta, saved, mode](Tape<T>& t, Tensor<T> self) {
        const Matrix<T>& g = t.grad(self);
        const Matrix<T>& xh = saved->first;
        const Matrix<T>& istd = saved->second;
        const Matrix<T> sum_g = g.colwise().sum();
        const Matrix<T> sum_gx = g.cwiseProduct(xh).colwise().sum();
        if (t.requires_grad(beta)) t.accumulate(beta, sum_g);
        if (t.requires_grad(gamma)) t.accumulate(gamma, sum_gx);
        if (!t.requires_grad(x)) return;
        const auto& gm = t.value(gamma);
        Matrix<T> scale_row = gm.cwiseProduct(istd);
        if (mode == Mode::kEval) {
          Matrix<T> dx = g;
          dx.array().rowwise() *= scale_row.array().row(0);
          t.accumulate(x, dx);
          return;
        }
        const T n = static_cast<T>(g.rows());
        // dx = gamma * inv_std / n * (n g - sum(g) - xhat * sum(g xhat))
        Matrix<T> dx = g * n;
        dx.rowwise() -= sum_g.row(0);
        dx -= (xh.array().rowwise() * sum_gx.array().row(0)).matrix();
        dx.array().rowwise() *= (scale_row.array() / n).row(0);
        t.accumulate(x, dx);
      },
      "batch_norm");
}

/// Multiplies by a fixed mask (entries 0 or 1/(1-p)).
template <typename T>
Tensor<T> apply_mask(Tensor<T> x, Matrix<T> mask) {
  if (mask.rows() != x.rows() || mask.cols() != x.cols()) throw ConfigError("apply_mask: shape mismatch");
  Matrix<T> out = x.value().cwiseProduct(mask);
  auto m = std::make_shared<Matrix<T>>(std::move(mask));
  return x.tape->push(std::move(out), x.requires_grad(),
                      [x, m](Tape<T>& t, Tensor<T> self) { t.accumulate(x, t.grad(self).cwiseProduct(*m)); },
                      "dropout");
}

/// Inverted dropout mask: each entry is 0 with probability p, else 1/(1-p).
template <typename T>
Matrix<T> dropout_mask(Eigen::Index rows, Eigen::Index cols, double p, Rng& rng) {
  Matrix<T> mask(rows, cols);
  const T keep_scale = static_cast<T>(1.0 / (1.0 - p));
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = rng.uniform() < p ? T(0) : keep_scale;
  return mask;
}

/// Identity in eval mode or when p == 0; otherwise applies a fresh mask.
template <typename T>
Tensor<T> dropout(Tensor<T> x, double p, Mode mode, Rng& rng) {
  if (!(p >= 0.0 && p < 1.0)) throw ConfigError("dropout: p must be in [0, 1)");
  if (mode == Mode::kEval || p == 0.0) return x;
  return apply_mask(x, dropout_mask<T>(x.rows(), x.cols(), p, rng));
}

/// 2 - 2 cos(p, z). Matrix mode takes the cosine of the flattened matrices
/// (Frobenius inner product over norms); per-node mode averages the row-wise
/// loss. z is treated as a constant: no gradient ever flows into it.
template <typename T>
Tensor<T> cosine_mse_loss(Tensor<T> p, Tensor<T> z, LossMode mode) {
  detail::same_tape(p, z, "cosine_mse_loss");
  if (p.rows() != z.rows() || p.cols() != z.cols()) throw ConfigError("cosine_mse_loss: shape mismatch");
  const Matrix<T>& pv = p.value();
  const Matrix<T>& zv = z.value();
  Matrix<T> out(1, 1);
  if (mode == LossMode::kMatrix) {
    const double dot = pv.template cast<double>().cwiseProduct(zv.template cast<double>()).sum();
    const double np = pv.template cast<double>().norm();
    const double nz = zv.template cast<double>().norm();
    if (np == 0.0 || nz == 0.0) throw NumericError("cosine_mse_loss: zero-norm input");
    out(0, 0) = static_cast<T>(2.0 - 2.0 * dot / (np * nz));
    return p.tape->push(std::move(out), p.requires_grad(),
                        [p, z, dot, np, nz](Tape<T>& t, Tensor<T> self) {
                          const double g = static_cast<double>(t.grad(self)(0, 0));
                          // d/dp = -2/(|p||z|) (z - <p,z> p / |p|^2)
                          const T cz = static_cast<T>(-2.0 * g / (np * nz));
                          const T cp = static_cast<T>(2.0 * g * dot / (np * np * np * nz));
                          t.accumulate(p, t.value(z) * cz + t.value(p) * cp);
                        },
                        "cosine_mse_loss");
  }
  const Eigen::Index n = pv.rows();
  Eigen::VectorXd dots(n), nps(n), nzs(n);
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto pr = pv.row(i).template cast<double>();
    const auto zr = zv.row(i).template cast<double>();
    dots[i] = pr.dot(zr);
    nps[i] = pr.norm();
    nzs[i] = zr.norm();
    if (nps[i] == 0.0 || nzs[i] == 0.0) throw NumericError("cosine_mse_loss: zero-norm row " + std::to_string(i));
    total += 2.0 - 2.0 * dots[i] / (nps[i] * nzs[i]);
  }
  out(0, 0) = static_cast<T>(total / static_cast<double>(n));
  auto saved = std::make_shared<std::array<Eigen::VectorXd, 3>>(std::array<Eigen::VectorXd, 3>{dots, nps, nzs});
  return p.tape->push(std::move(out), p.requires_grad(),
                      [p, z, saved](Tape<T>& t, Tensor<T> self) {
                        const double g = static_cast<double>(t.grad(self)(0, 0));
                        const auto& [d, np, nz] = *saved;
                        const auto n = static_cast<double>(d.size());
                        const Matrix<T>& pv = t.value(p);
                        const Matrix<T>& zv = t.value(z);
                        Matrix<T> dp(pv.rows(), pv.cols());
                        for (Eigen::Index i = 0; i < pv.rows(); ++i) {
                          const T cz = static_cast<T>(-2.0 * g / (n * np[i] * nz[i]));
                          const T cp = static_cast<T>(2.0 * g * d[i] / (n * np[i] * np[i] * np[i] * nz[i]));
                          dp.row(i) = zv.row(i) * cz + pv.row(i) * cp;
                        }
                        t.accumulate(p, dp);
                      },
                      "cosine_mse_loss");
}

/// Bias-corrected Adam over a fixed list of parameter matrices.
template <typename T>
class Adam {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  /// params[i] -= lr * mhat / (sqrt(vhat) + eps). Moments are created on the
  /// first call and shapes must stay fixed afterwards.
  void step(const std::vector<Matrix<T>*>& params, const std::vector<const Matrix<T>*>& grads) {
    if (params.size() != grads.size()) throw ConfigError("Adam: params/grads length mismatch");
    if (m_.empty()) {
      for (auto* p : params) {
        m_.push_back(Matrix<T>::Zero(p->rows(), p->cols()));
        v_.push_back(Matrix<T>::Zero(p->rows(), p->cols()));
      }
    }
    if (m_.size() != params.size()) throw ConfigError("Adam: parameter count changed");
    ++step_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(step_));
    const T b1 = static_cast<T>(beta1_), b2 = static_cast<T>(beta2_);
    const T step_size = static_cast<T>(lr_ / bc1);
    const T inv_sqrt_bc2 = static_cast<T>(1.0 / std::sqrt(bc2));
    const T eps = static_cast<T>(eps_);
    for (std::size_t i = 0; i < params.size(); ++i) {
      Matrix<T>& p = *params[i];
      const Matrix<T>& g = *grads[i];
      if (g.rows() != p.rows() || g.cols() != p.cols() || m_[i].rows() != p.rows() || m_[i].cols() != p.cols()) {
        throw ConfigError("Adam: gradient shape mismatch for parameter " + std::to_string(i));
      }
      m_[i] = b1 * m_[i] + (T(1) - b1) * g;
      v_[i] = b2 * v_[i] + (T(1) - b2) * g.cwiseProduct(g);
      p.array() -= step_size * m_[i].array() / (v_[i].array().sqrt() * inv_sqrt_bc2 + eps);
    }
  }

  double lr() const { return lr_; }
  long long steps() const { return step_; }
  const std::vector<Matrix<T>>& first_moments() const { return m_; }
  const std::vector<Matrix<T>>& second_moments() const { return v_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  long long step_ = 0;
  std::vector<Matrix<T>> m_;
  std::vector<Matrix<T>> v_;
};

}  // namespace selfgnn::ad
