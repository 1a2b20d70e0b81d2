#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <random>

namespace disamgnn {

/// Dense row-major storage used for features, layer outputs and gradients.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;

using NodeId = std::size_t;
using ClassId = std::size_t;

using Rng = std::mt19937_64;

}  // namespace disamgnn
