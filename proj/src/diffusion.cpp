#include "physgen/diffusion.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "physgen/error.hpp"

namespace physgen::diffusion {

void validate(const VPSchedule& sched) {
  require(sched.beta_min > 0.0 && sched.beta_max > sched.beta_min, "schedule requires 0 < beta_min < beta_max");
  require(sched.T > 0.0 && std::isfinite(sched.T), "schedule requires T > 0");
}

namespace {

void check_time(double t, const VPSchedule& sched) {
  if (!(t >= 0.0 && t <= sched.T)) {
    std::ostringstream msg;
    msg << "time " << t << " outside [0, " << sched.T << "]";
    fail(ErrorCode::invalid_argument, msg.str());
  }
}

}  // namespace

double beta(double t, const VPSchedule& sched) {
  check_time(t, sched);
  return sched.beta_min + (sched.beta_max - sched.beta_min) * t;
}

DriftDiffusion drift_diffusion(const Eigen::VectorXd& y, double t, const VPSchedule& sched) {
  const double b = beta(t, sched);
  return {-0.5 * b * y, std::sqrt(b)};
}

KernelCoeffs kernel_coeffs(double t, const VPSchedule& sched) {
  check_time(t, sched);
  const double spread = sched.beta_max - sched.beta_min;
  const double alpha = std::exp(-0.25 * t * t * spread - 0.5 * t * sched.beta_min);
  const double sigma2 = -std::expm1(-0.5 * t * t * spread - t * sched.beta_min);
  return {alpha, sigma2};
}

Eigen::VectorXd perturb(const Eigen::VectorXd& y0, double t, const Eigen::VectorXd& z, const VPSchedule& sched) {
  require(y0.size() == z.size(), "perturb: noise dimension mismatch");
  const KernelCoeffs k = kernel_coeffs(t, sched);
  return k.alpha * y0 + std::sqrt(k.sigma2) * z;
}

double dsm_loss(const BatchScoreFn& score, const Eigen::MatrixXd& y0, const Eigen::VectorXd& t,
                const Eigen::MatrixXd& z, const VPSchedule& sched, DsmWeighting weighting, double t_min) {
  require(y0.rows() == z.rows() && y0.cols() == z.cols(), "dsm_loss: noise shape mismatch");
  require(t.size() == y0.cols() && y0.cols() > 0, "dsm_loss: one time per batch member required");
  Eigen::MatrixXd yt(y0.rows(), y0.cols());
  Eigen::VectorXd sigma(t.size());
  for (Eigen::Index b = 0; b < t.size(); ++b) {
    if (t[b] < t_min) {
      std::ostringstream msg;
      msg << "dsm_loss: time " << t[b] << " below t_min " << t_min;
      fail(ErrorCode::invalid_argument, msg.str());
    }
    const KernelCoeffs k = kernel_coeffs(t[b], sched);
    sigma[b] = std::sqrt(k.sigma2);
    yt.col(b) = k.alpha * y0.col(b) + sigma[b] * z.col(b);
  }
  const Eigen::MatrixXd s = score(yt, t);
  require(s.rows() == y0.rows() && s.cols() == y0.cols(), "dsm_loss: score output shape mismatch");
  double total = 0.0;
  for (Eigen::Index b = 0; b < t.size(); ++b) {
    const double term = (s.col(b) + z.col(b) / sigma[b]).squaredNorm();
    total += weighting == DsmWeighting::unit ? term : sigma[b] * sigma[b] * term;
  }
  return total / static_cast<double>(t.size());
}

GaussianScoreOracle::GaussianScoreOracle(Eigen::VectorXd m0, Eigen::VectorXd v0, VPSchedule sched)
    : m0_(std::move(m0)), v0_(std::move(v0)), sched_(sched) {
  require(m0_.size() == v0_.size(), "gaussian oracle: mean and variance dimensions differ");
  require((v0_.array() >= 0.0).all(), "gaussian oracle: variances must be nonnegative");
}

Eigen::VectorXd GaussianScoreOracle::operator()(const Eigen::VectorXd& y, double t) const {
  require(y.size() == m0_.size(), "gaussian oracle: dimension mismatch");
  const KernelCoeffs k = kernel_coeffs(t, sched_);
  const Eigen::ArrayXd var = k.alpha * k.alpha * v0_.array() + k.sigma2;
  return (-(y - k.alpha * m0_).array() / var).matrix();
}

Eigen::MatrixXd GaussianScoreOracle::batch(const Eigen::MatrixXd& y, const Eigen::VectorXd& t) const {
  Eigen::MatrixXd out(y.rows(), y.cols());
  for (Eigen::Index b = 0; b < y.cols(); ++b) out.col(b) = (*this)(y.col(b), t[b]);
  return out;
}

double GaussianScoreOracle::log_density(const Eigen::VectorXd& y, double t) const {
  const KernelCoeffs k = kernel_coeffs(t, sched_);
  const Eigen::ArrayXd var = k.alpha * k.alpha * v0_.array() + k.sigma2;
  const Eigen::ArrayXd diff = (y - k.alpha * m0_).array();
  return -0.5 * ((diff * diff / var) + (2.0 * std::numbers::pi * var).log()).sum();
}

}  // namespace physgen::diffusion
