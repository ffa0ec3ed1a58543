#include "selfgnn/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace selfgnn {

SparseMatrix::SparseMatrix(int rows, int cols, std::vector<std::int64_t> row_ptr,
                           std::vector<int> col_idx, std::vector<double> values)
    : rows_(rows),
      cols_(cols),
      row_ptr_(std::move(row_ptr)),
      col_idx_(std::move(col_idx)),
      values_(std::move(values)) {
  validate();
}

SparseMatrix SparseMatrix::from_triplets(int rows, int cols, std::vector<Triplet> triplets) {
  for (const auto& t : triplets) {
    if (t.row < 0 || t.row >= rows || t.col < 0 || t.col >= cols) {
      throw DataError("sparse entry (" + std::to_string(t.row) + "," + std::to_string(t.col) +
                      ") out of range for " + std::to_string(rows) + "x" + std::to_string(cols));
    }
  }
  std::sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  std::vector<std::int64_t> rp(static_cast<std::size_t>(rows) + 1, 0);
  std::vector<int> ci;
  std::vector<double> vals;
  ci.reserve(triplets.size());
  vals.reserve(triplets.size());
  for (std::size_t k = 0; k < triplets.size(); ++k) {
    const auto& t = triplets[k];
    if (!ci.empty() && k > 0 && triplets[k - 1].row == t.row && ci.back() == t.col) {
      vals.back() += t.value;
      continue;
    }
    ci.push_back(t.col);
    vals.push_back(t.value);
    ++rp[static_cast<std::size_t>(t.row) + 1];
  }
  std::partial_sum(rp.begin(), rp.end(), rp.begin());
  return SparseMatrix(rows, cols, std::move(rp), std::move(ci), std::move(vals));
}

SparseMatrix SparseMatrix::identity(int n) {
  std::vector<std::int64_t> rp(static_cast<std::size_t>(n) + 1);
  std::iota(rp.begin(), rp.end(), 0);
  std::vector<int> ci(static_cast<std::size_t>(n));
  std::iota(ci.begin(), ci.end(), 0);
  return SparseMatrix(n, n, std::move(rp), std::move(ci), std::vector<double>(static_cast<std::size_t>(n), 1.0));
}

SparseMatrix SparseMatrix::zeros(int rows, int cols) {
  return SparseMatrix(rows, cols, std::vector<std::int64_t>(static_cast<std::size_t>(rows) + 1, 0), {}, {});
}

SparseMatrix SparseMatrix::from_dense(const DenseMatrix& m) {
  std::vector<std::int64_t> rp(static_cast<std::size_t>(m.rows()) + 1, 0);
  std::vector<int> ci;
  std::vector<double> vals;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (m(i, j) != 0.0) {
        ci.push_back(static_cast<int>(j));
        vals.push_back(m(i, j));
      }
    }
    rp[static_cast<std::size_t>(i) + 1] = static_cast<std::int64_t>(ci.size());
  }
  return SparseMatrix(static_cast<int>(m.rows()), static_cast<int>(m.cols()), std::move(rp), std::move(ci),
                      std::move(vals));
}

double SparseMatrix::at(int row, int col) const {
  const auto b = col_idx_.begin() + row_ptr_[static_cast<std::size_t>(row)];
  const auto e = col_idx_.begin() + row_ptr_[static_cast<std::size_t>(row) + 1];
  const auto it = std::lower_bound(b, e, col);
  if (it == e || *it != col) return 0.0;
  return values_[static_cast<std::size_t>(it - col_idx_.begin())];
}

DenseMatrix SparseMatrix::to_dense() const {
  DenseMatrix d = DenseMatrix::Zero(rows_, cols_);
  for (int i = 0; i < rows_; ++i) {
    for (auto k = row_ptr_[static_cast<std::size_t>(i)]; k < row_ptr_[static_cast<std::size_t>(i) + 1]; ++k) {
      d(i, col_idx_[static_cast<std::size_t>(k)]) = values_[static_cast<std::size_t>(k)];
    }
  }
  return d;
}

SparseMatrix SparseMatrix::transpose() const {
  std::vector<std::int64_t> rp(static_cast<std::size_t>(cols_) + 1, 0);
  for (int c : col_idx_) ++rp[static_cast<std::size_t>(c) + 1];
  std::partial_sum(rp.begin(), rp.end(), rp.begin());
  std::vector<std::int64_t> cursor(rp.begin(), rp.end() - 1);
  std::vector<int> ci(col_idx_.size());
  std::vector<double> vals(values_.size());
  // Rows are visited in increasing order, so transposed columns come out sorted.
  for (int i = 0; i < rows_; ++i) {
    for (auto k = row_ptr_[static_cast<std::size_t>(i)]; k < row_ptr_[static_cast<std::size_t>(i) + 1]; ++k) {
      const auto c = static_cast<std::size_t>(col_idx_[static_cast<std::size_t>(k)]);
      const auto dst = static_cast<std::size_t>(cursor[c]++);
      ci[dst] = i;
      vals[dst] = values_[static_cast<std::size_t>(k)];
    }
  }
  return SparseMatrix(cols_, rows_, std::move(rp), std::move(ci), std::move(vals));
}

bool SparseMatrix::is_symmetric() const {
  if (rows_ != cols_) return false;
  const SparseMatrix t = transpose();
  return t.row_ptr_ == row_ptr_ && t.col_idx_ == col_idx_ && t.values_ == values_;
}

DenseVector SparseMatrix::row_sums() const {
  DenseVector s = DenseVector::Zero(rows_);
  for (int i = 0; i < rows_; ++i) {
    for (auto k = row_ptr_[static_cast<std::size_t>(i)]; k < row_ptr_[static_cast<std::size_t>(i) + 1]; ++k) {
      s[i] += values_[static_cast<std::size_t>(k)];
    }
  }
  return s;
}

void SparseMatrix::validate() const {
  if (rows_ < 0 || cols_ < 0) throw DataError("sparse matrix: negative dimension");
  if (row_ptr_.size() != static_cast<std::size_t>(rows_) + 1) throw DataError("sparse matrix: row_ptr length != rows+1");
  if (row_ptr_.front() != 0) throw DataError("sparse matrix: row_ptr[0] != 0");
  if (row_ptr_.back() != static_cast<std::int64_t>(col_idx_.size()) || col_idx_.size() != values_.size()) {
    throw DataError("sparse matrix: row_ptr[rows] != nnz");
  }
  for (int i = 0; i < rows_; ++i) {
    const auto b = row_ptr_[static_cast<std::size_t>(i)];
    const auto e = row_ptr_[static_cast<std::size_t>(i) + 1];
    if (e < b) throw DataError("sparse matrix: row_ptr decreasing at row " + std::to_string(i));
    for (auto k = b; k < e; ++k) {
      const int c = col_idx_[static_cast<std::size_t>(k)];
      if (c < 0 || c >= cols_) throw DataError("sparse matrix: column index out of range in row " + std::to_string(i));
      if (k > b && c <= col_idx_[static_cast<std::size_t>(k) - 1]) {
        throw DataError("sparse matrix: columns not strictly increasing in row " + std::to_string(i));
      }
      if (!std::isfinite(values_[static_cast<std::size_t>(k)])) {
        throw DataError("sparse matrix: non-finite value in row " + std::to_string(i));
      }
    }
  }
}

}  // namespace selfgnn
