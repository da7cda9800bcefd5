#include <cmath>

#include "doctest.h"
#include "physgen/diffusion.hpp"
#include "physgen/error.hpp"
#include "support.hpp"

using namespace physgen;
using namespace physgen::diffusion;

TEST_SUITE("diffusion") {
  TEST_CASE("beta endpoints") {
    const VPSchedule s;
    CHECK(beta(0.0, s) == 1e-4);
    CHECK(beta(1.0, s) == doctest::Approx(10.0).epsilon(1e-15));
    CHECK(beta(0.5, s) == doctest::Approx(5.00005).epsilon(1e-14));
    CHECK_THROWS_AS(beta(1.01, s), Error);
    CHECK_THROWS_AS(beta(-0.01, s), Error);
    CHECK_THROWS_AS(validate(VPSchedule{1.0, 0.5, 1.0}), Error);
  }

  TEST_CASE("kernel coefficients") {
    const VPSchedule s;
    const KernelCoeffs k1 = kernel_coeffs(1.0, s);
    // closed form exp(-(10 - 1e-4)/4 - 1e-4/2)
    CHECK(k1.alpha == doctest::Approx(std::exp(-2.499975 - 0.00005)).epsilon(1e-13));
    CHECK(k1.alpha == doctest::Approx(0.08208).epsilon(1e-4));
    CHECK(k1.sigma2 == doctest::Approx(0.99326).epsilon(1e-5));
    const KernelCoeffs k0 = kernel_coeffs(0.0, s);
    CHECK(k0.alpha == 1.0);
    CHECK(k0.sigma2 == 0.0);
    for (double t : {1e-6, 0.01, 0.3, 0.77, 1.0}) {
      const KernelCoeffs k = kernel_coeffs(t, s);
      CHECK(k.alpha * k.alpha + k.sigma2 == doctest::Approx(1.0).epsilon(1e-14));
    }
    // sigma2 stays accurate near t = 0
    CHECK(kernel_coeffs(1e-8, s).sigma2 == doctest::Approx(1e-12).epsilon(1e-6));
  }

  TEST_CASE("alpha solves the mean ODE") {
    const VPSchedule s;
    for (double t : {0.1, 0.5, 0.9}) {
      const double h = 1e-6;
      const double dlog = (std::log(kernel_coeffs(t + h, s).alpha) - std::log(kernel_coeffs(t - h, s).alpha)) / (2 * h);
      CHECK(dlog == doctest::Approx(-0.5 * beta(t, s)).epsilon(1e-7));
    }
  }

  TEST_CASE("drift and diffusion") {
    const VPSchedule s;
    const Eigen::Vector2d y(2.0, -4.0);
    const DriftDiffusion dd = drift_diffusion(y, 0.5, s);
    CHECK(dd.drift[0] == doctest::Approx(-5.00005));
    CHECK(dd.drift[1] == doctest::Approx(10.0001));
    CHECK(dd.diffusion == doctest::Approx(std::sqrt(5.00005)));
  }

  TEST_CASE("perturbation moments") {
    const VPSchedule s;
    Rng rng(12);
    const Eigen::VectorXd y0 = Eigen::VectorXd::Constant(1, 2.0);
    const int draws = 40000;
    const double t = 0.4;
    const KernelCoeffs k = kernel_coeffs(t, s);
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < draws; ++i) {
      const double v = perturb(y0, t, testing::normals(rng, 1), s)[0];
      sum += v;
      sq += v * v;
    }
    const double mean = sum / draws, var = sq / draws - mean * mean;
    CHECK(testing::z_score(mean, k.alpha * 2.0, k.sigma2, draws) < 4.0);
    CHECK(var == doctest::Approx(k.sigma2).epsilon(0.03));
  }

  TEST_CASE("two-stage noising matches direct noising") {
    const VPSchedule s;
    // transition 0.3 -> 0.7 from a trapezoid integral of beta, independent of kernel_coeffs
    double integral = 0.0;
    const int panels = 1000;
    for (int i = 0; i < panels; ++i) {
      const double a = 0.3 + 0.4 * i / panels, b = 0.3 + 0.4 * (i + 1) / panels;
      integral += 0.5 * (beta(a, s) + beta(b, s)) * (b - a);
    }
    const double step_alpha = std::exp(-0.5 * integral);
    const double step_sd = std::sqrt(1.0 - step_alpha * step_alpha);

    Rng rng(13);
    const Eigen::VectorXd y0 = Eigen::VectorXd::Constant(1, 2.0);
    const int draws = 100000;
    double sum2 = 0.0, sq2 = 0.0, sum1 = 0.0, sq1 = 0.0;
    for (int i = 0; i < draws; ++i) {
      const double mid = perturb(y0, 0.3, testing::normals(rng, 1), s)[0];
      const double two = step_alpha * mid + step_sd * rng.normal();
      const double one = perturb(y0, 0.7, testing::normals(rng, 1), s)[0];
      sum2 += two, sq2 += two * two;
      sum1 += one, sq1 += one * one;
    }
    const double m2 = sum2 / draws, m1 = sum1 / draws;
    const double v2 = sq2 / draws - m2 * m2, v1 = sq1 / draws - m1 * m1;
    const KernelCoeffs k = kernel_coeffs(0.7, s);
    // difference of two independent means
    CHECK(std::abs(m2 - m1) < 5.0 * std::sqrt(2.0 * k.sigma2 / draws));
    CHECK(std::abs(v2 - v1) < 5.0 * k.sigma2 * std::sqrt(4.0 / draws));
    CHECK(std::abs(m2 - 2.0 * k.alpha) < 5.0 * std::sqrt(k.sigma2 / draws));
  }

  TEST_CASE("dsm loss examples") {
    const VPSchedule s;
    Rng rng(13);
    const Eigen::MatrixXd y0 = Eigen::MatrixXd::Random(3, 4);
    Eigen::MatrixXd z(3, 4);
    for (int c = 0; c < 4; ++c) z.col(c) = testing::normals(rng, 3);
    const Eigen::Vector4d t(0.1, 0.3, 0.6, 1.0);

    // the conditional score of the kernel makes the loss vanish
    const BatchScoreFn exact = [&](const Eigen::MatrixXd& y, const Eigen::VectorXd& tt) {
      Eigen::MatrixXd out(y.rows(), y.cols());
      for (int c = 0; c < y.cols(); ++c) {
        const KernelCoeffs k = kernel_coeffs(tt[c], s);
        out.col(c) = -(y.col(c) - k.alpha * y0.col(c)) / k.sigma2;
      }
      return out;
    };
    CHECK(dsm_loss(exact, y0, t, z, s) < 1e-20);

    const BatchScoreFn zero = [](const Eigen::MatrixXd& y, const Eigen::VectorXd&) {
      return Eigen::MatrixXd::Zero(y.rows(), y.cols()).eval();
    };
    double unit = 0.0, weighted = 0.0;
    for (int c = 0; c < 4; ++c) {
      unit += z.col(c).squaredNorm() / kernel_coeffs(t[c], s).sigma2;
      weighted += z.col(c).squaredNorm();
    }
    CHECK(dsm_loss(zero, y0, t, z, s) == doctest::Approx(unit / 4));
    CHECK(dsm_loss(zero, y0, t, z, s, DsmWeighting::kernel_variance) == doctest::Approx(weighted / 4));
    CHECK_THROWS_AS(dsm_loss(zero, y0, Eigen::Vector4d(0.1, 0.3, 0.0, 1.0), z, s), Error);
  }

  TEST_CASE("Gaussian oracle is the gradient of its log density") {
    const VPSchedule s;
    const GaussianScoreOracle oracle(Eigen::Vector3d(1.0, -2.0, 0.5), Eigen::Vector3d(0.3, 2.0, 0.0), s);
    Rng rng(14);
    for (double t : {0.01, 0.2, 0.9}) {
      const Eigen::VectorXd y = testing::normals(rng, 3);
      const Eigen::VectorXd fd = testing::fd_gradient([&](const Eigen::VectorXd& v) { return oracle.log_density(v, t); }, y, 1e-6);
      CHECK(testing::max_rel_err(oracle(y, t), fd, 1e-6) < 1e-6);
    }
  }

  TEST_CASE("standard normal is stationary under the VP process") {
    const VPSchedule s;
    const GaussianScoreOracle oracle(Eigen::VectorXd::Zero(4), Eigen::VectorXd::Ones(4), s);
    const Eigen::Vector4d y(0.3, -1.2, 2.0, 0.0);
    for (double t : {0.0, 0.25, 1.0}) CHECK((oracle(y, t) + y).cwiseAbs().maxCoeff() < 1e-14);
  }
}
