#pragma once

#include <Eigen/Dense>

namespace berknash {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Dense row-major table. Used for (x, a) tables and, with S*m rows, for
// transition kernels laid out as (x, a, x').
using Table = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

}  // namespace berknash
