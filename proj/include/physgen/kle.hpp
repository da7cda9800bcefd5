#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "physgen/darcy.hpp"
#include "physgen/grid.hpp"

namespace physgen::kle {

/// Exponential covariance exp(-|x - x'| / length) of the log-permeability field.
struct CovarianceSpec {
  double length = 0.25;
  double mean = 0.0;
};

struct KLEBasis {
  GridSpec grid{3};
  double mean = 0.0;
  Eigen::VectorXd lambdas;  // descending, clamped to >= 0
  Eigen::MatrixXd phis;     // n^2 x s, orthonormal columns

  int order() const noexcept { return static_cast<int>(lambdas.size()); }
};

Eigen::MatrixXd covariance_matrix(const GridSpec& grid, const CovarianceSpec& spec);

/// Top-s eigenpairs of a symmetric covariance. Each eigenvector's largest-magnitude
/// entry is made positive.
KLEBasis kle_decompose(const Eigen::MatrixXd& cov, int s, const GridSpec& grid, double mean);

/// K = exp(mean + sum_i sqrt(lambda_i) theta_i phi_i).
ScalarField sample_permeability(const KLEBasis& basis, const Eigen::VectorXd& theta);

struct DarcyDatasetSpec {
  int count = 2000;
  int n = 16;
  int s = 16;
  CovarianceSpec covariance;
  darcy::SourceSpec source;
  std::uint64_t seed = 0;
};

struct DarcySample {
  ScalarField pressure;
  ScalarField permeability;
  Eigen::VectorXd theta;
};

/// Samples are independent of each other and of the worker count: sample k draws
/// theta from a stream seeded by (seed, k).
std::vector<DarcySample> generate_darcy_samples(const DarcyDatasetSpec& spec);

}  // namespace physgen::kle
