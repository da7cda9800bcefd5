#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "physgen/sampler.hpp"

namespace physgen::inverse {

/// Measured entries of the state vector. `values` holds one column per chain (or a
/// single column shared by all chains).
struct MeasurementSet {
  std::vector<int> indices;
  Eigen::MatrixXd values;

  int m() const noexcept { return static_cast<int>(indices.size()); }
  Eigen::VectorXd column(int chain) const;
};

/// Checks that indices are distinct, in [0, dim) and that values have m rows.
void validate(const MeasurementSet& meas, Eigen::Index dim);

/// Seeded permutation of [0, channel_size); the first m entries are the measured nodes,
/// so measurement sets of increasing m are nested.
std::vector<int> measurement_order(int channel_size, std::uint64_t seed);

/// Measures the first m nodes of measurement_order on every column of `fields`.
MeasurementSet select_measurements(const Eigen::MatrixXd& fields, int m, std::uint64_t seed);

/// y[idx] <- alpha(t) omega + sqrt(sigma2(t)) z for every measured index.
void known_dim_replace(Eigen::Ref<Eigen::VectorXd> y, double t, const std::vector<int>& indices,
                       const Eigen::VectorXd& omega, const Eigen::VectorXd& z, const diffusion::VPSchedule& sched);

/// Imputation sampler: measurements are given in physical units. `finalize` runs only
/// when nothing is measured; otherwise measured entries are written back exactly.
sampling::SampleResult impute_sample(const sampling::ScoreFn& score, const sampling::SamplerConfig& cfg,
                                     const MeasurementSet& meas, const sampling::ConsistencyContext* ctx,
                                     const sampling::Standardizer& stdz, int count,
                                     const std::function<void(Eigen::Ref<Eigen::VectorXd>, int)>& finalize = {});

/// Imputation with r forward/reverse resampling pairs per step.
sampling::SampleResult repaint_sample(const sampling::ScoreFn& score, const sampling::SamplerConfig& cfg,
                                      const MeasurementSet& meas, const sampling::ConsistencyContext* ctx,
                                      const sampling::Standardizer& stdz, int count, int r,
                                      const std::function<void(Eigen::Ref<Eigen::VectorXd>, int)>& finalize = {});

struct PODBasis {
  Eigen::MatrixXd psi;              // d x k, orthonormal columns
  Eigen::VectorXd singular_values;  // descending
  Eigen::VectorXd mean;
};

/// Snapshot POD of `data` (columns are samples).
PODBasis pod_basis(const Eigen::MatrixXd& data, int k);

/// Gappy reconstruction mean + psi pinv(P psi) (q - P mean) from entries `indices`.
Eigen::VectorXd pod_reconstruct(const PODBasis& basis, const std::vector<int>& indices, const Eigen::VectorXd& q);

}  // namespace physgen::inverse
