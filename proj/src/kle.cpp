#include "physgen/kle.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <sstream>

#include "physgen/error.hpp"
#include "physgen/parallel.hpp"
#include "physgen/rng.hpp"

namespace physgen::kle {

Eigen::MatrixXd covariance_matrix(const GridSpec& grid, const CovarianceSpec& spec) {
  require(spec.length > 0.0 && std::isfinite(spec.length), "covariance length scale must be positive");
  const int size = grid.size();
  Eigen::MatrixXd c(size, size);
  for (int a = 0; a < size; ++a) {
    const double xa = grid.coord(a / grid.n()), ya = grid.coord(a % grid.n());
    c(a, a) = 1.0;
    for (int b = a + 1; b < size; ++b) {
      const double xb = grid.coord(b / grid.n()), yb = grid.coord(b % grid.n());
      const double v = std::exp(-std::hypot(xa - xb, ya - yb) / spec.length);
      c(a, b) = v;
      c(b, a) = v;
    }
  }
  return c;
}

KLEBasis kle_decompose(const Eigen::MatrixXd& cov, int s, const GridSpec& grid, double mean) {
  require(cov.rows() == cov.cols() && cov.rows() == grid.size(), "kle_decompose: covariance shape mismatch");
  require(s >= 1 && s <= cov.rows(), "kle_decompose: truncation order out of range");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) fail(ErrorCode::solver, "kle_decompose: eigensolver failed");

  // eigenvalues come back ascending
  const Eigen::Index size = cov.rows();
  KLEBasis basis{grid, mean, Eigen::VectorXd(s), Eigen::MatrixXd(size, s)};
  for (int k = 0; k < s; ++k) {
    const Eigen::Index src = size - 1 - k;
    double lambda = eig.eigenvalues()[src];
    if (lambda < -1e-10) {
      std::ostringstream msg;
      msg << "kle_decompose: covariance has negative eigenvalue " << lambda;
      fail(ErrorCode::solver, msg.str());
    }
    basis.lambdas[k] = std::max(lambda, 0.0);
    Eigen::VectorXd phi = eig.eigenvectors().col(src);
    Eigen::Index at = 0;
    phi.cwiseAbs().maxCoeff(&at);
    if (phi[at] < 0.0) phi = -phi;
    basis.phis.col(k) = phi;
  }
  return basis;
}

ScalarField sample_permeability(const KLEBasis& basis, const Eigen::VectorXd& theta) {
  require(theta.size() == basis.order(), "sample_permeability: theta length must equal truncation order");
  require(theta.allFinite(), "sample_permeability: non-finite theta");
  const Eigen::VectorXd coeffs = basis.lambdas.cwiseSqrt().cwiseProduct(theta);
  Eigen::VectorXd log_k = (basis.phis * coeffs).array() + basis.mean;
  return ScalarField(basis.grid, log_k.array().exp().matrix());
}

std::vector<DarcySample> generate_darcy_samples(const DarcyDatasetSpec& spec) {
  require(spec.count >= 1, "dataset count must be positive");
  const GridSpec grid(spec.n);
  darcy::validate(spec.source);
  const KLEBasis basis = kle_decompose(covariance_matrix(grid, spec.covariance), spec.s, grid, spec.covariance.mean);
  const ScalarField source = darcy::source_function(grid, spec.source);

  std::vector<DarcySample> out(spec.count, DarcySample{ScalarField(grid), ScalarField(grid), {}});
  parallel_for(static_cast<std::size_t>(spec.count), [&](std::size_t k) {
    Rng rng(stream_seed(spec.seed, k));
    Eigen::VectorXd theta(spec.s);
    rng.fill_normal(theta);
    ScalarField perm = sample_permeability(basis, theta);
    try {
      out[k].pressure = darcy::solve_pressure(perm, source);
    } catch (const Error& e) {
      fail(e.code(), "sample " + std::to_string(k) + ": " + e.what());
    }
    out[k].permeability = std::move(perm);
    out[k].theta = std::move(theta);
  });
  return out;
}

}  // namespace physgen::kle
