#include "physgen/grid.hpp"

#include <cmath>

#include "physgen/error.hpp"

namespace physgen {

GridSpec::GridSpec(int n) : n_(n) { require(n >= 3, "grid needs at least 3 nodes per axis"); }

ScalarField::ScalarField(GridSpec grid) : grid_(grid), values_(Eigen::VectorXd::Zero(grid.size())) {}

ScalarField::ScalarField(GridSpec grid, Eigen::VectorXd values) : grid_(grid), values_(std::move(values)) {
  require(values_.size() == grid_.size(), "field size does not match grid");
}

Eigen::Map<const RowMatrix> ScalarField::as_matrix() const {
  return Eigen::Map<const RowMatrix>(values_.data(), grid_.n(), grid_.n());
}

bool ScalarField::all_finite() const { return values_.allFinite(); }

Eigen::VectorXd trapezoid_weights(const GridSpec& grid) {
  const int n = grid.n();
  Eigen::VectorXd axis = Eigen::VectorXd::Constant(n, 2.0);
  axis[0] = axis[n - 1] = 1.0;
  Eigen::VectorXd w(grid.size());
  const double scale = grid.dx() * grid.dx() / 4.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) w[grid.index(i, j)] = scale * axis[i] * axis[j];
  return w;
}

double trapezoid_integral(const ScalarField& field) {
  if (!field.all_finite()) fail(ErrorCode::invalid_argument, "trapezoid_integral: non-finite field value");
  return trapezoid_weights(field.grid()).dot(field.values());
}

ScalarField zero_mean_normalize(const ScalarField& field) {
  ScalarField out = field;
  zero_mean_normalize(field.grid(), {out.values().data(), static_cast<std::size_t>(out.values().size())});
  return out;
}

void zero_mean_normalize(const GridSpec& grid, std::span<double> values) {
  require(values.size() == static_cast<std::size_t>(grid.size()), "field size does not match grid");
  Eigen::Map<Eigen::VectorXd> v(values.data(), grid.size());
  if (!v.allFinite()) fail(ErrorCode::invalid_argument, "zero_mean_normalize: non-finite field value");
  const double mean = trapezoid_weights(grid).dot(v);
  v.array() -= mean;
}

}  // namespace physgen
