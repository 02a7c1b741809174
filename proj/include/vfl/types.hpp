#pragma once

#include <Eigen/Dense>

namespace vfl {

using Index = Eigen::Index;

// Row-major: frames, packed rows and NPY payloads are all row-contiguous.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

}  // namespace vfl
