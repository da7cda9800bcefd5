#include <cmath>

#include "doctest.h"
#include "physgen/error.hpp"
#include "physgen/kle.hpp"
#include "support.hpp"

using namespace physgen;

TEST_SUITE("kle") {
  TEST_CASE("covariance entries") {
    const GridSpec g(5);
    const Eigen::MatrixXd c = kle::covariance_matrix(g, {0.25, 0.0});
    CHECK(c.rows() == 25);
    CHECK((c.diagonal().array() - 1.0).abs().maxCoeff() == 0.0);
    CHECK((c - c.transpose()).cwiseAbs().maxCoeff() == 0.0);
    // neighbours a quarter apart sit one length scale away
    CHECK(c(g.index(0, 0), g.index(1, 0)) == doctest::Approx(std::exp(-1.0)).epsilon(1e-14));
    CHECK(c(g.index(0, 0), g.index(1, 1)) == doctest::Approx(std::exp(-std::sqrt(2.0))).epsilon(1e-14));
    CHECK_THROWS_AS(kle::covariance_matrix(g, {0.0, 0.0}), Error);
  }

  TEST_CASE("eigenpairs") {
    const GridSpec g(6);
    const Eigen::MatrixXd c = kle::covariance_matrix(g, {});
    const kle::KLEBasis b = kle::kle_decompose(c, 10, g, 0.0);
    CHECK(b.order() == 10);
    for (int k = 0; k + 1 < 10; ++k) CHECK(b.lambdas[k] >= b.lambdas[k + 1]);
    CHECK((b.phis.transpose() * b.phis - Eigen::MatrixXd::Identity(10, 10)).cwiseAbs().maxCoeff() < 1e-12);
    for (int k = 0; k < 10; ++k) {
      CHECK((c * b.phis.col(k) - b.lambdas[k] * b.phis.col(k)).norm() < 1e-10);
      Eigen::Index at = 0;
      b.phis.col(k).cwiseAbs().maxCoeff(&at);
      CHECK(b.phis(at, k) > 0.0);
    }
    CHECK_THROWS_AS(kle::kle_decompose(c, 0, g, 0.0), Error);
    CHECK_THROWS_AS(kle::kle_decompose(c, 37, g, 0.0), Error);
  }

  TEST_CASE("full expansion reconstructs the covariance") {
    const GridSpec g(5);
    const Eigen::MatrixXd c = kle::covariance_matrix(g, {});
    const kle::KLEBasis b = kle::kle_decompose(c, 25, g, 0.0);
    const Eigen::MatrixXd rebuilt = b.phis * b.lambdas.asDiagonal() * b.phis.transpose();
    CHECK((rebuilt - c).cwiseAbs().maxCoeff() < 1e-12);
  }

  TEST_CASE("zero coefficients give the mean field") {
    const GridSpec g(4);
    const kle::KLEBasis b = kle::kle_decompose(kle::covariance_matrix(g, {}), 5, g, 0.7);
    const ScalarField k = kle::sample_permeability(b, Eigen::VectorXd::Zero(5));
    CHECK((k.values().array() - std::exp(0.7)).abs().maxCoeff() < 1e-14);
    CHECK_THROWS_AS(kle::sample_permeability(b, Eigen::VectorXd::Zero(4)), Error);
  }

  TEST_CASE("log-permeability is linear in theta") {
    const GridSpec g(5);
    const kle::KLEBasis b = kle::kle_decompose(kle::covariance_matrix(g, {}), 8, g, 0.0);
    Rng rng(3);
    const Eigen::VectorXd a = testing::normals(rng, 8), c = testing::normals(rng, 8);
    auto logk = [&](const Eigen::VectorXd& th) { return kle::sample_permeability(b, th).values().array().log().matrix().eval(); };
    CHECK((logk(2.0 * a - c) - (2.0 * logk(a) - logk(c))).cwiseAbs().maxCoeff() < 1e-12);
  }

  TEST_CASE("Monte Carlo covariance of log-permeability") {
    const GridSpec g(4);
    const Eigen::MatrixXd c = kle::covariance_matrix(g, {});
    const kle::KLEBasis b = kle::kle_decompose(c, 16, g, 0.0);
    Rng rng(11);
    const int draws = 20000;
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(16, 16);
    for (int k = 0; k < draws; ++k) {
      const Eigen::VectorXd l = kle::sample_permeability(b, testing::normals(rng, 16)).values().array().log();
      acc += l * l.transpose();
    }
    acc /= draws;
    // entry variance is at most 2 / draws, so 5 standard errors is 0.05
    CHECK((acc - c).cwiseAbs().maxCoeff() < 0.05);
  }

  TEST_CASE("dataset generation is deterministic and sample-wise") {
    kle::DarcyDatasetSpec spec;
    spec.count = 4;
    spec.n = 8;
    spec.s = 6;
    spec.seed = 99;
    const auto a = kle::generate_darcy_samples(spec);
    const auto b = kle::generate_darcy_samples(spec);
    spec.count = 2;
    const auto head = kle::generate_darcy_samples(spec);
    for (int k = 0; k < 4; ++k) {
      CHECK(a[k].theta == b[k].theta);
      CHECK(a[k].pressure.values() == b[k].pressure.values());
    }
    CHECK(head[1].pressure.values() == a[1].pressure.values());
    CHECK(a[0].theta != a[1].theta);
    CHECK(std::abs(trapezoid_integral(a[2].pressure)) < 1e-10);
  }
}
