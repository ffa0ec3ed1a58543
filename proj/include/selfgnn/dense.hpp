#pragma once

#include <Eigen/Dense>

namespace selfgnn {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using DenseMatrix = RowMatrix<double>;
using DenseVector = Eigen::VectorXd;

}  // namespace selfgnn
