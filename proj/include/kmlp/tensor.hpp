#pragma once

#include <Eigen/Core>

namespace kmlp {

// Activations and parameters are stored row-major: one sample (or one output
// unit) per row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

enum class Mode { Train, Infer };

}  // namespace kmlp
