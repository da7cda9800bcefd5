#include "physgen/darcy.hpp"

#include <Eigen/OrderingMethods>
#include <Eigen/SparseQR>
#include <cmath>
#include <sstream>
#include <vector>

#include "physgen/error.hpp"

namespace physgen::darcy {

namespace {

void require_same_grid(const ScalarField& a, const ScalarField& b, const char* what) {
  require(a.grid() == b.grid(), std::string(what) + ": fields are on different grids");
}

}  // namespace

void validate(const SourceSpec& src) {
  require(std::isfinite(src.rate) && src.rate > 0.0, "source rate must be finite and positive");
  require(std::isfinite(src.width) && src.width > 0.0 && src.width <= 0.5, "source width must lie in (0, 0.5]");
}

ScalarField source_function(const GridSpec& grid, const SourceSpec& src) {
  validate(src);
  ScalarField f(grid);
  const double half = src.width / 2.0;
  auto in_box = [half](double x, double centre) { return std::abs(x - centre) <= half; };
  for (int i = 0; i < grid.n(); ++i) {
    for (int j = 0; j < grid.n(); ++j) {
      const double x1 = grid.coord(i), x2 = grid.coord(j);
      if (in_box(x1, half) && in_box(x2, half))
        f(i, j) = src.rate;
      else if (in_box(x1, 1.0 - half) && in_box(x2, 1.0 - half))
        f(i, j) = -src.rate;
    }
  }
  return f;
}

DarcySystem assemble_system(const ScalarField& permeability, const ScalarField& source) {
  require_same_grid(permeability, source, "assemble_system");
  const GridSpec& grid = permeability.grid();
  if ((permeability.values().array() <= 0.0).any() || !permeability.all_finite())
    fail(ErrorCode::invalid_argument, "assemble_system: permeability must be finite and strictly positive");

  const int n = grid.n();
  const double h = grid.dx();
  const double lap = 1.0 / (h * h);
  // product of two central first differences, each over 2h
  const double conv = 1.0 / (4.0 * h * h);
  const auto& K = permeability;

  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(static_cast<std::size_t>(grid.size()) * 9 + grid.size());
  auto add = [&](int row, int i, int j, double v) { entries.emplace_back(row, grid.index(i, j), v); };

  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const int row = grid.index(i, j);
      const double k = K(i, j);
      const bool lo_i = i == 0, hi_i = i == n - 1, lo_j = j == 0, hi_j = j == n - 1;

      // x1 direction: ghost-point mirror on the boundary, otherwise central
      if (lo_i || hi_i) {
        add(row, lo_i ? 1 : n - 2, j, -2.0 * k * lap);
      } else {
        add(row, i - 1, j, -k * lap);
        add(row, i + 1, j, -k * lap);
        const double dk = K(i + 1, j) - K(i - 1, j);
        add(row, i + 1, j, -conv * dk);
        add(row, i - 1, j, conv * dk);
      }
      if (lo_j || hi_j) {
        add(row, i, lo_j ? 1 : n - 2, -2.0 * k * lap);
      } else {
        add(row, i, j - 1, -k * lap);
        add(row, i, j + 1, -k * lap);
        const double dk = K(i, j + 1) - K(i, j - 1);
        add(row, i, j + 1, -conv * dk);
        add(row, i, j - 1, conv * dk);
      }
      add(row, i, j, 4.0 * k * lap);
    }
  }
  const Eigen::VectorXd w = trapezoid_weights(grid);
  for (int c = 0; c < grid.size(); ++c) entries.emplace_back(grid.size(), c, w[c]);

  DarcySystem sys;
  sys.matrix.resize(grid.size() + 1, grid.size());
  sys.matrix.setFromTriplets(entries.begin(), entries.end());
  sys.matrix.makeCompressed();
  sys.rhs = Eigen::VectorXd::Zero(grid.size() + 1);
  sys.rhs.head(grid.size()) = source.values();
  return sys;
}

ScalarField solve_pressure(const ScalarField& permeability, const ScalarField& source, const SolveOptions& opts) {
  DarcySystem sys = assemble_system(permeability, source);
  const GridSpec& grid = permeability.grid();

  Eigen::SparseQR<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> qr;
  qr.compute(sys.matrix);
  if (qr.info() != Eigen::Success) fail(ErrorCode::solver, "solve_pressure: QR factorization failed");
  if (qr.rank() < grid.size()) {
    std::ostringstream msg;
    msg << "solve_pressure: rank-deficient system (rank " << qr.rank() << " of " << grid.size()
        << ", K range [" << permeability.values().minCoeff() << ", " << permeability.values().maxCoeff() << "])";
    fail(ErrorCode::solver, msg.str());
  }
  Eigen::VectorXd p = qr.solve(sys.rhs);
  if (qr.info() != Eigen::Success || !p.allFinite()) fail(ErrorCode::solver, "solve_pressure: least-squares solve failed");

  if (opts.tolerance > 0.0) {
    const Eigen::VectorXd normal = sys.matrix.transpose() * (sys.matrix * p - sys.rhs);
    const double scale = (sys.matrix.transpose() * sys.rhs).cwiseAbs().maxCoeff();
    const double err = normal.cwiseAbs().maxCoeff();
    if (err > opts.tolerance * std::max(scale, 1.0)) {
      std::ostringstream msg;
      msg << "solve_pressure: normal-equation residual " << err << " exceeds tolerance (scale " << scale << ")";
      fail(ErrorCode::solver, msg.str());
    }
  }
  return zero_mean_normalize(ScalarField(grid, std::move(p)));
}

RowMatrix first_derivative_matrix(int n, double h) {
  require(n >= 3, "first derivative stencil needs 3 nodes");
  RowMatrix d = RowMatrix::Zero(n, n);
  const double c = 1.0 / (2.0 * h);
  d(0, 0) = -3.0 * c, d(0, 1) = 4.0 * c, d(0, 2) = -c;
  for (int i = 1; i < n - 1; ++i) d(i, i - 1) = -c, d(i, i + 1) = c;
  d(n - 1, n - 1) = 3.0 * c, d(n - 1, n - 2) = -4.0 * c, d(n - 1, n - 3) = c;
  return d;
}

RowMatrix second_derivative_matrix(int n, double h) {
  require(n >= 4, "one-sided second derivative stencil needs 4 nodes");
  RowMatrix d = RowMatrix::Zero(n, n);
  const double c = 1.0 / (h * h);
  d(0, 0) = 2.0 * c, d(0, 1) = -5.0 * c, d(0, 2) = 4.0 * c, d(0, 3) = -c;
  for (int i = 1; i < n - 1; ++i) d(i, i - 1) = c, d(i, i) = -2.0 * c, d(i, i + 1) = c;
  d(n - 1, n - 1) = 2.0 * c, d(n - 1, n - 2) = -5.0 * c, d(n - 1, n - 3) = 4.0 * c, d(n - 1, n - 4) = -c;
  return d;
}

std::pair<ScalarField, ScalarField> velocity(const ScalarField& permeability, const ScalarField& pressure) {
  require_same_grid(permeability, pressure, "velocity");
  const GridSpec& grid = pressure.grid();
  const int n = grid.n();
  const RowMatrix d1 = first_derivative_matrix(n, grid.dx());
  const auto P = pressure.as_matrix();
  const auto K = permeability.as_matrix();

  RowMatrix u1 = -(K.array() * (d1 * P).array()).matrix();
  RowMatrix u2 = -(K.array() * (P * d1.transpose()).array()).matrix();
  return {ScalarField(grid, Eigen::Map<Eigen::VectorXd>(u1.data(), grid.size())),
          ScalarField(grid, Eigen::Map<Eigen::VectorXd>(u2.data(), grid.size()))};
}

namespace {

struct Stencils {
  RowMatrix d1, d2;
  explicit Stencils(const GridSpec& g) : d1(first_derivative_matrix(g.n(), g.dx())), d2(second_derivative_matrix(g.n(), g.dx())) {}
};

}  // namespace

ScalarField residual(const ScalarField& permeability, const ScalarField& pressure, const ScalarField& source) {
  require_same_grid(permeability, pressure, "residual");
  require_same_grid(permeability, source, "residual");
  const GridSpec& grid = pressure.grid();
  const Stencils s(grid);
  const auto P = pressure.as_matrix();
  const auto K = permeability.as_matrix();
  const RowMatrix kx = s.d1 * K, ky = K * s.d1.transpose();

  RowMatrix r = (K.array() * (s.d2 * P + P * s.d2.transpose()).array() + kx.array() * (s.d1 * P).array() +
                 ky.array() * (P * s.d1.transpose()).array())
                    .matrix();
  r += source.as_matrix();
  return ScalarField(grid, Eigen::Map<Eigen::VectorXd>(r.data(), grid.size()));
}

ScalarField residual_gradient(const ScalarField& permeability, const ScalarField& pressure, const ScalarField& source) {
  ScalarField r = residual(permeability, pressure, source);
  const GridSpec& grid = pressure.grid();
  const Stencils s(grid);
  const auto K = permeability.as_matrix();
  const RowMatrix kx = s.d1 * K, ky = K * s.d1.transpose();
  const auto R = r.as_matrix();

  const RowMatrix kr = K.array() * R.array();
  const RowMatrix kxr = kx.array() * R.array();
  const RowMatrix kyr = ky.array() * R.array();
  RowMatrix g = 2.0 * (s.d2.transpose() * kr + kr * s.d2 + s.d1.transpose() * kxr + kyr * s.d1);
  return ScalarField(grid, Eigen::Map<Eigen::VectorXd>(g.data(), grid.size()));
}

double residual_sq_norm(const ScalarField& permeability, const ScalarField& pressure, const ScalarField& source) {
  return residual(permeability, pressure, source).values().squaredNorm();
}

}  // namespace physgen::darcy
