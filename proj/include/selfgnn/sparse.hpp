#pragma once

#include <cstdint>
#include <vector>

#include "selfgnn/dense.hpp"
#include "selfgnn/errors.hpp"
#include "selfgnn/parallel.hpp"

namespace selfgnn {

struct Triplet {
  int row;
  int col;
  double value;
};

/// Compressed sparse row matrix with double weights.
///
/// Invariants: row_ptr has rows+1 nondecreasing entries starting at 0 and
/// ending at nnz; column indices are strictly increasing within a row; all
/// values are finite. Instances are immutable once built.
class SparseMatrix {
 public:
  SparseMatrix() = default;
  SparseMatrix(int rows, int cols, std::vector<std::int64_t> row_ptr, std::vector<int> col_idx,
               std::vector<double> values);

  /// Builds from unordered triplets. Duplicate coordinates are summed.
  static SparseMatrix from_triplets(int rows, int cols, std::vector<Triplet> triplets);
  static SparseMatrix identity(int n);
  static SparseMatrix zeros(int rows, int cols);
  static SparseMatrix from_dense(const DenseMatrix& m);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::int64_t nnz() const { return static_cast<std::int64_t>(values_.size()); }

  const std::vector<std::int64_t>& row_ptr() const { return row_ptr_; }
  const std::vector<int>& col_idx() const { return col_idx_; }
  const std::vector<double>& values() const { return values_; }

  /// Entry lookup by binary search within the row; 0 when absent.
  double at(int row, int col) const;

  DenseMatrix to_dense() const;
  SparseMatrix transpose() const;
  bool is_symmetric() const;
  DenseVector row_sums() const;

  /// Throws DataError when an invariant is violated.
  void validate() const;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<std::int64_t> row_ptr_{0};
  std::vector<int> col_idx_;
  std::vector<double> values_;
};

/// out = S * x. Each output row is accumulated in column order, so the result
/// is identical for any thread count.
template <typename T>
RowMatrix<T> spmm(const SparseMatrix& s, const RowMatrix<T>& x) {
  if (s.cols() != x.rows()) {
    throw ConfigError("spmm: shape mismatch (" + std::to_string(s.rows()) + "x" +
                      std::to_string(s.cols()) + " times " + std::to_string(x.rows()) + "x" +
                      std::to_string(x.cols()) + ")");
  }
  RowMatrix<T> out = RowMatrix<T>::Zero(s.rows(), x.cols());
  const auto& rp = s.row_ptr();
  const auto& ci = s.col_idx();
  const auto& v = s.values();
  parallel_for(static_cast<std::size_t>(s.rows()), [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      auto row = out.row(static_cast<Eigen::Index>(i));
      for (std::int64_t k = rp[i]; k < rp[i + 1]; ++k) {
        row.noalias() += static_cast<T>(v[static_cast<std::size_t>(k)]) * x.row(ci[static_cast<std::size_t>(k)]);
      }
    }
  });
  return out;
}

}  // namespace selfgnn
