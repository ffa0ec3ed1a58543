#include "selfgnn/diffusion.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>

namespace selfgnn {

namespace {

std::atomic<std::int64_t> g_peak_elements{0};
std::atomic<std::int64_t> g_allocations{0};
thread_local int t_heat_terms = 0;

DenseMatrix tracked_dense(Eigen::Index rows, Eigen::Index cols) {
  const std::int64_t n = static_cast<std::int64_t>(rows) * static_cast<std::int64_t>(cols);
  std::int64_t prev = g_peak_elements.load();
  while (n > prev && !g_peak_elements.compare_exchange_weak(prev, n)) {
  }
  g_allocations.fetch_add(1);
  return DenseMatrix::Zero(rows, cols);
}

void require_square(const SparseMatrix& m, const char* who) {
  if (m.rows() != m.cols()) throw ConfigError(std::string(who) + ": operator must be square");
}

void require_dense_size(int n) {
  if (n > kMaxDenseDiffusionNodes) {
    throw ConfigError("dense diffusion refused for " + std::to_string(n) + " nodes (limit " +
                      std::to_string(kMaxDenseDiffusionNodes) + "); use the iterative solver or cluster mode");
  }
}

/// Solves (I - c S) H = rhs. For symmetric S with spectral radius <= 1 and
/// c < 1 the system is positive definite and Cholesky applies.
DenseMatrix dense_shifted_solve(const SparseMatrix& s, double c, const DenseMatrix& rhs) {
  const int n = s.rows();
  DenseMatrix m = tracked_dense(n, n);
  m.diagonal().setOnes();
  const auto& rp = s.row_ptr();
  const auto& ci = s.col_idx();
  const auto& v = s.values();
  for (int i = 0; i < n; ++i) {
    for (auto k = rp[static_cast<std::size_t>(i)]; k < rp[static_cast<std::size_t>(i) + 1]; ++k) {
      m(i, ci[static_cast<std::size_t>(k)]) -= c * v[static_cast<std::size_t>(k)];
    }
  }
  DenseMatrix h = tracked_dense(n, rhs.cols());
  if (s.is_symmetric()) {
    Eigen::LLT<Eigen::MatrixXd> llt(m);
    if (llt.info() != Eigen::Success) throw NumericError("diffusion: system matrix is not positive definite");
    h = llt.solve(Eigen::MatrixXd(rhs));
  } else {
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(m);
    h = lu.solve(Eigen::MatrixXd(rhs));
  }
  return h;
}

}  // namespace

void DiffusionConfig::validate() const {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("diffusion.alpha must be in (0, 1]");
  if (!(t >= 0.0) || !std::isfinite(t)) throw ConfigError("diffusion.t must be >= 0");
  if (!(beta >= 0.0 && beta < 1.0)) throw ConfigError("diffusion.beta must be in [0, 1)");
  if (!(tol > 0.0)) throw ConfigError("diffusion.tol must be > 0");
  if (max_terms < 1) throw ConfigError("diffusion.max_terms must be >= 1");
  if (sparsify == SparsifyMode::kEpsilon && !(epsilon > 0.0)) throw ConfigError("diffusion.epsilon must be > 0");
  if (sparsify == SparsifyMode::kTopK && top_k < 1) throw ConfigError("diffusion.top_k must be >= 1");
}

DenseMatrix ppr_diffusion(const SparseMatrix& a_tilde, const DiffusionConfig& cfg) {
  require_square(a_tilde, "ppr_diffusion");
  if (!(cfg.alpha > 0.0 && cfg.alpha <= 1.0)) throw ConfigError("ppr_diffusion: alpha must be in (0, 1]");
  const int n = a_tilde.rows();
  const double c = 1.0 - cfg.alpha;
  if (cfg.solver == SolverKind::kDense) {
    require_dense_size(n);
    DenseMatrix rhs = tracked_dense(n, n);
    rhs.diagonal().setConstant(cfg.alpha);
    return dense_shifted_solve(a_tilde, c, rhs);
  }
  DenseMatrix term = tracked_dense(n, n);
  term.diagonal().setConstant(cfg.alpha);
  DenseMatrix h = term;
  for (int k = 1;; ++k) {
    if (k > cfg.max_terms) {
      throw NumericError("ppr_diffusion: series did not reach tol within max_terms=" + std::to_string(cfg.max_terms));
    }
    term = spmm<double>(a_tilde, term);
    term *= c;
    h += term;
    if (term.cwiseAbs().maxCoeff() < cfg.tol) break;
  }
  return h;
}

DenseMatrix katz_diffusion(const SparseMatrix& a_tilde, const DiffusionConfig& cfg) {
  require_square(a_tilde, "katz_diffusion");
  if (!(cfg.beta >= 0.0 && cfg.beta < 1.0)) throw ConfigError("katz_diffusion: beta must be in [0, 1)");
  const int n = a_tilde.rows();
  if (cfg.solver == SolverKind::kDense) {
    require_dense_size(n);
    DenseMatrix rhs = tracked_dense(n, n);
    rhs = a_tilde.to_dense() * cfg.beta;
    return dense_shifted_solve(a_tilde, cfg.beta, rhs);
  }
  DenseMatrix term = tracked_dense(n, n);
  term = a_tilde.to_dense() * cfg.beta;
  DenseMatrix h = term;
  if (term.size() == 0 || term.cwiseAbs().maxCoeff() < cfg.tol) return h;
  for (int k = 2;; ++k) {
    if (k > cfg.max_terms) {
      throw NumericError("katz_diffusion: series did not reach tol within max_terms=" + std::to_string(cfg.max_terms));
    }
    term = spmm<double>(a_tilde, term);
    term *= cfg.beta;
    h += term;
    if (term.cwiseAbs().maxCoeff() < cfg.tol) break;
  }
  return h;
}

SparseMatrix column_stochastic_transition(const SparseMatrix& adjacency, IsolatedPolicy policy) {
  require_square(adjacency, "column_stochastic_transition");
  // For symmetric A, column j of A D^{-1} is row j of A divided by d_j.
  const DenseVector deg = adjacency.row_sums();
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(adjacency.nnz()));
  const auto& rp = adjacency.row_ptr();
  const auto& ci = adjacency.col_idx();
  const auto& v = adjacency.values();
  for (int j = 0; j < adjacency.rows(); ++j) {
    if (deg[j] == 0.0) {
      if (policy == IsolatedPolicy::kReject) {
        throw ConfigError("heat_kernel_diffusion: node " + std::to_string(j) + " is isolated (policy=reject)");
      }
      continue;
    }
    for (auto k = rp[static_cast<std::size_t>(j)]; k < rp[static_cast<std::size_t>(j) + 1]; ++k) {
      t.push_back({ci[static_cast<std::size_t>(k)], j, v[static_cast<std::size_t>(k)] / deg[j]});
    }
  }
  return SparseMatrix::from_triplets(adjacency.rows(), adjacency.cols(), std::move(t));
}

DenseMatrix heat_kernel_diffusion(const SparseMatrix& adjacency, const DiffusionConfig& cfg) {
  require_square(adjacency, "heat_kernel_diffusion");
  if (!(cfg.t >= 0.0)) throw ConfigError("heat_kernel_diffusion: t must be >= 0");
  const int n = adjacency.rows();
  if (cfg.t == 0.0) {
    DenseMatrix h = tracked_dense(n, n);
    h.diagonal().setOnes();
    t_heat_terms = 1;
    return h;
  }
  const SparseMatrix p = column_stochastic_transition(adjacency, cfg.isolated);
  const double t = cfg.t;
  DenseMatrix term = tracked_dense(n, n);
  term.diagonal().setConstant(std::exp(-t));
  DenseMatrix h = term;
  int terms = 1;
  for (int k = 0; terms < cfg.max_terms; ++k) {
    // Coefficient of the next term: e^{-t} t^{k+1} / (k+1)!
    const double log_next = -t + (k + 1) * std::log(t) - std::lgamma(static_cast<double>(k) + 2.0);
    if (std::exp(log_next) < cfg.tol) break;
    term = spmm<double>(p, term);
    term *= t / static_cast<double>(k + 1);
    h += term;
    ++terms;
  }
  t_heat_terms = terms;
  return h;
}

DenseMatrix heat_kernel_diffusion(const Graph& g, const DiffusionConfig& cfg) {
  return heat_kernel_diffusion(g.adjacency, cfg);
}

int last_heat_kernel_terms() { return t_heat_terms; }

SparseMatrix sparsify(const DenseMatrix& h, const DiffusionConfig& cfg) {
  if (h.rows() != h.cols()) throw ConfigError("sparsify: matrix must be square");
  if (cfg.sparsify == SparsifyMode::kEpsilon && !(cfg.epsilon > 0.0)) throw ConfigError("sparsify: epsilon must be > 0");
  if (cfg.sparsify == SparsifyMode::kTopK && cfg.top_k < 1) throw ConfigError("sparsify: k must be >= 1");
  const auto n = h.rows();
  std::vector<std::int64_t> rp(static_cast<std::size_t>(n) + 1, 0);
  std::vector<int> ci;
  std::vector<double> vals;
  std::vector<int> order;
  for (Eigen::Index i = 0; i < n; ++i) {
    switch (cfg.sparsify) {
      case SparsifyMode::kNone:
        for (Eigen::Index j = 0; j < n; ++j) {
          if (h(i, j) != 0.0) {
            ci.push_back(static_cast<int>(j));
            vals.push_back(h(i, j));
          }
        }
        break;
      case SparsifyMode::kEpsilon:
        for (Eigen::Index j = 0; j < n; ++j) {
          if (std::abs(h(i, j)) >= cfg.epsilon) {
            ci.push_back(static_cast<int>(j));
            vals.push_back(h(i, j));
          }
        }
        break;
      case SparsifyMode::kTopK: {
        order.clear();
        for (Eigen::Index j = 0; j < n; ++j) {
          if (h(i, j) != 0.0) order.push_back(static_cast<int>(j));
        }
        const std::size_t keep = std::min<std::size_t>(order.size(), static_cast<std::size_t>(cfg.top_k));
        std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), order.end(), [&](int a, int b) {
          const double va = std::abs(h(i, a));
          const double vb = std::abs(h(i, b));
          return va != vb ? va > vb : a < b;
        });
        order.resize(keep);
        std::sort(order.begin(), order.end());
        for (int j : order) {
          ci.push_back(j);
          vals.push_back(h(i, j));
        }
        break;
      }
    }
    rp[static_cast<std::size_t>(i) + 1] = static_cast<std::int64_t>(ci.size());
  }
  return SparseMatrix(static_cast<int>(n), static_cast<int>(n), std::move(rp), std::move(ci), std::move(vals));
}

namespace {

SparseMatrix weighted_renormalize(const SparseMatrix& h) {
  const DenseVector d = h.row_sums();
  std::vector<double> vals(h.values());
  const auto& rp = h.row_ptr();
  const auto& ci = h.col_idx();
  for (int i = 0; i < h.rows(); ++i) {
    for (auto k = rp[static_cast<std::size_t>(i)]; k < rp[static_cast<std::size_t>(i) + 1]; ++k) {
      const double dd = d[i] * d[ci[static_cast<std::size_t>(k)]];
      vals[static_cast<std::size_t>(k)] = dd > 0.0 ? vals[static_cast<std::size_t>(k)] / std::sqrt(dd) : 0.0;
    }
  }
  return SparseMatrix(h.rows(), h.cols(), rp, ci, std::move(vals));
}

}  // namespace

SparseMatrix diffusion_operator(const Graph& g, const DiffusionConfig& cfg) {
  cfg.validate();
  DenseMatrix h;
  switch (cfg.kind) {
    case DiffusionKind::kPpr: h = ppr_diffusion(symmetric_renormalize(g), cfg); break;
    case DiffusionKind::kHeat: h = heat_kernel_diffusion(g, cfg); break;
    case DiffusionKind::kKatz: h = katz_diffusion(symmetric_renormalize(g), cfg); break;
  }
  SparseMatrix s = sparsify(h, cfg);
  return cfg.renormalize ? weighted_renormalize(s) : s;
}

DiffusionAllocStats diffusion_alloc_stats() { return {g_peak_elements.load(), g_allocations.load()}; }

void reset_diffusion_alloc_stats() {
  g_peak_elements.store(0);
  g_allocations.store(0);
}

std::string to_string(DiffusionKind k) {
  switch (k) {
    case DiffusionKind::kPpr: return "ppr";
    case DiffusionKind::kHeat: return "heat";
    case DiffusionKind::kKatz: return "katz";
  }
  return "?";
}

DiffusionKind parse_diffusion_kind(const std::string& s) {
  if (s == "ppr") return DiffusionKind::kPpr;
  if (s == "heat") return DiffusionKind::kHeat;
  if (s == "katz") return DiffusionKind::kKatz;
  throw ConfigError("unknown diffusion kind '" + s + "'");
}

}  // namespace selfgnn
