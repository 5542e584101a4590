#pragma once

#include <Eigen/Dense>

namespace coopmpc {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

}  // namespace coopmpc
