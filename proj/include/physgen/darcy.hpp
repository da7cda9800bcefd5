#pragma once

#include <Eigen/SparseCore>
#include <utility>

#include "physgen/grid.hpp"

namespace physgen::darcy {

/// Piecewise-constant corner source: +rate near the origin, -rate near (1, 1).
struct SourceSpec {
  double rate = 10.0;
  double width = 0.125;
};

void validate(const SourceSpec& src);

ScalarField source_function(const GridSpec& grid, const SourceSpec& src);

/// Overdetermined (n^2 + 1) x n^2 system: one PDE row per node plus the integral row.
struct DarcySystem {
  Eigen::SparseMatrix<double> matrix;
  Eigen::VectorXd rhs;
};

DarcySystem assemble_system(const ScalarField& permeability, const ScalarField& source);

struct SolveOptions {
  /// Bound on max|Ap - f| checked after the solve; <= 0 disables the check.
  double tolerance = 1e-8;
};

/// Least-squares pressure, shifted to zero trapezoid mean.
ScalarField solve_pressure(const ScalarField& permeability, const ScalarField& source,
                           const SolveOptions& opts = {});

/// u = -K grad p with second-order central (interior) and one-sided (boundary) stencils.
std::pair<ScalarField, ScalarField> velocity(const ScalarField& permeability, const ScalarField& pressure);

/// Chain-rule residual K lap p + grad K . grad p + f with one-sided boundary stencils.
/// Requires n >= 4.
ScalarField residual(const ScalarField& permeability, const ScalarField& pressure, const ScalarField& source);

/// Exact gradient of ||residual||^2 with respect to pressure (2 R^T r).
ScalarField residual_gradient(const ScalarField& permeability, const ScalarField& pressure,
                              const ScalarField& source);

double residual_sq_norm(const ScalarField& permeability, const ScalarField& pressure, const ScalarField& source);

/// Second-order first/second derivative matrices along one axis of n nodes with spacing h.
/// Interior rows are central; first and last rows use one-sided stencils.
RowMatrix first_derivative_matrix(int n, double h);
RowMatrix second_derivative_matrix(int n, double h);

}  // namespace physgen::darcy
