#pragma once

#include <Eigen/Core>

#include <cstddef>

namespace ltk {

/// Row-major dense matrix. Rows are candidates / tokens throughout the toolkit.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// One optimization step's population together with its search box.
struct Observation {
  Matrix X;   // m x d
  Vector y;   // m
  Vector lb;  // d
  Vector ub;  // d

  Eigen::Index population() const { return X.rows(); }
  Eigen::Index dimension() const { return X.cols(); }

  /// Throws ConfigError unless m >= 2, shapes agree and lb < ub everywhere.
  void validate() const;
};

}  // namespace ltk
