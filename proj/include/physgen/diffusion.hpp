#pragma once

#include <Eigen/Core>
#include <functional>

namespace physgen::diffusion {

/// Linear-beta variance-preserving SDE dy = -beta/2 y dt + sqrt(beta) dw.
struct VPSchedule {
  double beta_min = 1e-4;
  double beta_max = 10.0;
  double T = 1.0;
};

void validate(const VPSchedule& sched);

double beta(double t, const VPSchedule& sched);

struct DriftDiffusion {
  Eigen::VectorXd drift;
  double diffusion;
};

DriftDiffusion drift_diffusion(const Eigen::VectorXd& y, double t, const VPSchedule& sched);

/// Mean scale and variance of the Gaussian transition kernel p(y(t) | y(0)).
struct KernelCoeffs {
  double alpha;
  double sigma2;
};

KernelCoeffs kernel_coeffs(double t, const VPSchedule& sched);

Eigen::VectorXd perturb(const Eigen::VectorXd& y0, double t, const Eigen::VectorXd& z, const VPSchedule& sched);

/// Batched score: columns of `y` are states, `t` holds one time per column.
using BatchScoreFn = std::function<Eigen::MatrixXd(const Eigen::MatrixXd& y, const Eigen::VectorXd& t)>;

/// Time weighting inside the denoising score-matching objective.
enum class DsmWeighting {
  unit,             // lambda(t) = 1
  kernel_variance,  // lambda(t) = sigma2(t)
};

/// Default lower bound on training times; the target z / sigma diverges at t = 0.
inline constexpr double kDefaultTMin = 1e-5;

/// Mean over the batch of lambda(t) ||s(y(t), t) + z / sigma(t)||^2 with y(t) = perturb(y0, t, z).
/// Columns of y0 and z are batch members.
double dsm_loss(const BatchScoreFn& score, const Eigen::MatrixXd& y0, const Eigen::VectorXd& t,
                const Eigen::MatrixXd& z, const VPSchedule& sched, DsmWeighting weighting = DsmWeighting::unit,
                double t_min = kDefaultTMin);

/// Exact score of N(m0, diag(v0)) pushed through the forward kernel.
class GaussianScoreOracle {
 public:
  GaussianScoreOracle(Eigen::VectorXd m0, Eigen::VectorXd v0, VPSchedule sched);

  Eigen::VectorXd operator()(const Eigen::VectorXd& y, double t) const;
  Eigen::MatrixXd batch(const Eigen::MatrixXd& y, const Eigen::VectorXd& t) const;
  double log_density(const Eigen::VectorXd& y, double t) const;

 private:
  Eigen::VectorXd m0_;
  Eigen::VectorXd v0_;
  VPSchedule sched_;
};

}  // namespace physgen::diffusion
