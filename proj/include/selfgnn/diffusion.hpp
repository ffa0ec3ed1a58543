#pragma once

#include <cstdint>
#include <string>

#include "selfgnn/dense.hpp"
#include "selfgnn/graph.hpp"
#include "selfgnn/sparse.hpp"

namespace selfgnn {

enum class DiffusionKind { kPpr, kHeat, kKatz };
enum class SolverKind { kDense, kIterative };
enum class SparsifyMode { kNone, kEpsilon, kTopK };
enum class IsolatedPolicy { kZero, kReject };

struct DiffusionConfig {
  DiffusionKind kind = DiffusionKind::kPpr;
  double alpha = 0.15;  // teleport probability, (0, 1]
  double t = 3.0;       // heat-kernel diffusion time, >= 0
  double beta = 0.1;    // Katz decay, [0, 1)
  SolverKind solver = SolverKind::kDense;
  double tol = 1e-10;
  int max_terms = 2000;
  SparsifyMode sparsify = SparsifyMode::kEpsilon;
  double epsilon = 1e-4;
  int top_k = 32;
  IsolatedPolicy isolated = IsolatedPolicy::kZero;
  bool renormalize = false;  // symmetric renormalization of the sparsified operator

  /// Throws ConfigError on out-of-range parameters.
  void validate() const;
};

/// Dense diffusion is refused above this node count.
inline constexpr int kMaxDenseDiffusionNodes = 20000;

/// H = alpha (I - (1 - alpha) A_tilde)^{-1}.
DenseMatrix ppr_diffusion(const SparseMatrix& a_tilde, const DiffusionConfig& cfg);

/// H = exp(t A D^{-1} - t I), truncated Taylor series. Columns of isolated
/// nodes in A D^{-1} are zero under IsolatedPolicy::kZero.
DenseMatrix heat_kernel_diffusion(const Graph& g, const DiffusionConfig& cfg);
DenseMatrix heat_kernel_diffusion(const SparseMatrix& adjacency, const DiffusionConfig& cfg);

/// H = (I - beta A_tilde)^{-1} beta A_tilde.
DenseMatrix katz_diffusion(const SparseMatrix& a_tilde, const DiffusionConfig& cfg);

/// Thresholds a dense diffusion matrix into a sparse propagation operator.
SparseMatrix sparsify(const DenseMatrix& h, const DiffusionConfig& cfg);

/// Dispatches on cfg.kind, sparsifies, and optionally renormalizes.
SparseMatrix diffusion_operator(const Graph& g, const DiffusionConfig& cfg);

/// Column-stochastic transition matrix A D^{-1} (see IsolatedPolicy).
SparseMatrix column_stochastic_transition(const SparseMatrix& adjacency, IsolatedPolicy policy);

/// Number of terms used by the most recent heat-kernel series on this thread.
int last_heat_kernel_terms();

/// Tracks the largest dense matrix (in elements) allocated by the diffusion
/// routines. Used to check that per-batch diffusion stays within n x n.
struct DiffusionAllocStats {
  std::int64_t peak_elements = 0;
  std::int64_t allocations = 0;
};
DiffusionAllocStats diffusion_alloc_stats();
void reset_diffusion_alloc_stats();

std::string to_string(DiffusionKind k);
DiffusionKind parse_diffusion_kind(const std::string& s);

}  // namespace selfgnn
