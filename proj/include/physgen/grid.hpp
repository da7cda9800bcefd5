#pragma once

#include <Eigen/Core>
#include <span>

namespace physgen {

/// Uniform n x n node grid on the unit square, spacing 1/(n-1) on both axes.
class GridSpec {
 public:
  explicit GridSpec(int n);

  int n() const noexcept { return n_; }
  int size() const noexcept { return n_ * n_; }
  double dx() const noexcept { return 1.0 / (n_ - 1); }
  /// Flat row-major index of node (i, j); i runs along x1, j along x2.
  int index(int i, int j) const noexcept { return i * n_ + j; }
  double coord(int i) const noexcept { return static_cast<double>(i) / (n_ - 1); }

  bool operator==(const GridSpec&) const = default;

 private:
  int n_;
};

/// Node values on a GridSpec. Storage is row-major with (i, j) -> x = (i dx, j dx).
class ScalarField {
 public:
  explicit ScalarField(GridSpec grid);
  ScalarField(GridSpec grid, Eigen::VectorXd values);

  const GridSpec& grid() const noexcept { return grid_; }
  const Eigen::VectorXd& values() const noexcept { return values_; }
  Eigen::VectorXd& values() noexcept { return values_; }

  double operator()(int i, int j) const { return values_[grid_.index(i, j)]; }
  double& operator()(int i, int j) { return values_[grid_.index(i, j)]; }

  /// n x n view with rows indexed by i (x1) and columns by j (x2).
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> as_matrix() const;

  bool all_finite() const;

 private:
  GridSpec grid_;
  Eigen::VectorXd values_;
};

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// 2D trapezoid weights (1 corner, 2 edge, 4 interior) scaled by dx^2/4.
Eigen::VectorXd trapezoid_weights(const GridSpec& grid);

double trapezoid_integral(const ScalarField& field);

/// Shifts the field so that its trapezoid integral vanishes.
ScalarField zero_mean_normalize(const ScalarField& field);

/// In-place variant on a raw flat n*n block.
void zero_mean_normalize(const GridSpec& grid, std::span<double> values);

}  // namespace physgen
