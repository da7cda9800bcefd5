#include "physgen/inverse.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "physgen/error.hpp"

namespace physgen::inverse {

using Eigen::MatrixXd;
using Eigen::VectorXd;

VectorXd MeasurementSet::column(int chain) const {
  if (values.cols() == 1) return values.col(0);
  require(chain >= 0 && chain < values.cols(), "measurement set: no values for chain");
  return values.col(chain);
}

void validate(const MeasurementSet& meas, Eigen::Index dim) {
  require(meas.values.rows() == meas.m(), "measurement set: value rows must equal m");
  require(meas.m() == 0 || meas.values.cols() >= 1, "measurement set: missing values");
  std::unordered_set<int> seen;
  for (int idx : meas.indices) {
    require(idx >= 0 && idx < dim, "measurement index out of range");
    require(seen.insert(idx).second, "measurement indices must be distinct");
  }
  require(meas.values.allFinite(), "measurement values must be finite");
}

std::vector<int> measurement_order(int channel_size, std::uint64_t seed) {
  require(channel_size >= 1, "measurement_order: empty channel");
  std::vector<int> order(channel_size);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(stream_seed(seed, 0x6d65617375726573ULL));
  for (int i = channel_size - 1; i > 0; --i) std::swap(order[i], order[rng.uniform_int(0, i)]);
  return order;
}

MeasurementSet select_measurements(const MatrixXd& fields, int m, std::uint64_t seed) {
  const int size = static_cast<int>(fields.rows());
  require(m >= 0 && m <= size, "select_measurements: m out of range");
  std::vector<int> order = measurement_order(size, seed);
  MeasurementSet meas;
  meas.indices.assign(order.begin(), order.begin() + m);
  meas.values.resize(m, fields.cols());
  for (int k = 0; k < m; ++k) meas.values.row(k) = fields.row(meas.indices[k]);
  return meas;
}

void known_dim_replace(Eigen::Ref<VectorXd> y, double t, const std::vector<int>& indices, const VectorXd& omega,
                       const VectorXd& z, const diffusion::VPSchedule& sched) {
  require(omega.size() == static_cast<Eigen::Index>(indices.size()), "known_dim_replace: omega size mismatch");
  require(z.size() == omega.size(), "known_dim_replace: noise size mismatch");
  const diffusion::KernelCoeffs k = diffusion::kernel_coeffs(t, sched);
  const double sigma = std::sqrt(k.sigma2);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    require(indices[i] >= 0 && indices[i] < y.size(), "known_dim_replace: index out of range");
    y[indices[i]] = k.alpha * omega[i] + sigma * z[i];
  }
}

sampling::SampleResult impute_sample(const sampling::ScoreFn& score, const sampling::SamplerConfig& cfg,
                                     const MeasurementSet& meas, const sampling::ConsistencyContext* ctx,
                                     const sampling::Standardizer& stdz, int count,
                                     const std::function<void(Eigen::Ref<VectorXd>, int)>& finalize) {
  return repaint_sample(score, cfg, meas, ctx, stdz, count, 0, finalize);
}

sampling::SampleResult repaint_sample(const sampling::ScoreFn& score, const sampling::SamplerConfig& cfg,
                                      const MeasurementSet& meas, const sampling::ConsistencyContext* ctx,
                                      const sampling::Standardizer& stdz, int count, int r,
                                      const std::function<void(Eigen::Ref<VectorXd>, int)>& finalize) {
  if (cfg.equation != sampling::Equation::reverse_sde)
    fail(ErrorCode::unsupported,
         "imputation requires the reverse SDE: known dimensions are drawn from the closed-form forward kernel, "
         "while the probability-flow ODE would need a full forward ODE solve per step, which is prohibitively "
         "expensive");
  require(r >= 0, "repaint: resampling count must be nonnegative");
  const Eigen::Index dim = stdz.mean.size();
  validate(meas, dim);
  require(meas.m() == 0 || meas.values.cols() == 1 || meas.values.cols() == count,
          "measurement values must have one column or one per chain");

  // measurements in model units
  MatrixXd omega(meas.m(), meas.values.cols());
  for (int k = 0; k < meas.m(); ++k) {
    const int idx = meas.indices[k];
    omega.row(k) = (meas.values.row(k).array() - stdz.mean[idx]) / stdz.scale[idx];
  }
  const bool shared = omega.cols() == 1;

  sampling::LoopHooks hooks;
  hooks.resample = r;
  if (meas.m() > 0) {
    hooks.after_reverse = [&](Eigen::Ref<VectorXd> y, double t, int chain, Rng& rng) {
      VectorXd z(meas.m());
      rng.fill_normal(z);
      known_dim_replace(y, t, meas.indices, omega.col(shared ? 0 : chain), z, cfg.schedule);
    };
    VectorXd free = VectorXd::Ones(dim);
    for (int idx : meas.indices) free[idx] = 0.0;
    hooks.consistency_mask = free;
    hooks.finalize = [&](Eigen::Ref<VectorXd> x, int chain) {
      const VectorXd w = meas.column(chain);
      for (int k = 0; k < meas.m(); ++k) x[meas.indices[k]] = w[k];
    };
  } else {
    hooks.finalize = finalize;
  }
  return sampling::sample_loop(score, cfg, ctx, stdz, count, hooks);
}

PODBasis pod_basis(const MatrixXd& data, int k) {
  const Eigen::Index d = data.rows(), count = data.cols();
  require(count >= 1 && d >= 1, "pod_basis: empty dataset");
  require(k >= 1 && k <= std::min(d, count), "pod_basis: rank out of range");
  PODBasis basis;
  basis.mean = data.rowwise().mean();
  const MatrixXd centered = data.colwise() - basis.mean;
  Eigen::BDCSVD<MatrixXd> svd(centered, Eigen::ComputeThinU);
  basis.psi = svd.matrixU().leftCols(k);
  basis.singular_values = svd.singularValues().head(k);
  return basis;
}

VectorXd pod_reconstruct(const PODBasis& basis, const std::vector<int>& indices, const VectorXd& q) {
  require(!indices.empty(), "pod_reconstruct: at least one measurement is required");
  require(q.size() == static_cast<Eigen::Index>(indices.size()), "pod_reconstruct: q size mismatch");
  const Eigen::Index m = q.size(), k = basis.psi.cols();
  MatrixXd p_psi(m, k);
  VectorXd rhs(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    require(indices[i] >= 0 && indices[i] < basis.psi.rows(), "pod_reconstruct: index out of range");
    p_psi.row(i) = basis.psi.row(indices[i]);
    rhs[i] = q[i] - basis.mean[indices[i]];
  }
  Eigen::JacobiSVD<MatrixXd> svd(p_psi, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const VectorXd& sv = svd.singularValues();
  if (sv.size() == 0 || sv[0] == 0.0) fail(ErrorCode::invalid_argument, "pod_reconstruct: P psi is identically zero");
  const double cutoff = 1e-10 * sv[0];
  VectorXd coeff = VectorXd::Zero(k);
  const VectorXd ut = svd.matrixU().transpose() * rhs;
  for (Eigen::Index j = 0; j < sv.size(); ++j)
    if (sv[j] > cutoff) coeff += svd.matrixV().col(j) * (ut[j] / sv[j]);
  return basis.mean + basis.psi * coeff;
}

}  // namespace physgen::inverse
