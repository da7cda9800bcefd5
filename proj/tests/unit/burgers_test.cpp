#include <cmath>
#include <numbers>

#include "doctest.h"
#include "physgen/burgers.hpp"
#include "physgen/error.hpp"
#include "support.hpp"

using namespace physgen;
using burgers::BurgersConfig;
using burgers::SpaceTimeField;

namespace {

BurgersConfig small_config() {
  BurgersConfig cfg;
  cfg.nx = 16;
  cfg.nt = 8;
  cfg.dt = 0.01;
  cfg.nu = 0.05;
  return cfg;
}

}  // namespace

TEST_SUITE("burgers") {
  TEST_CASE("initial condition") {
    const Eigen::VectorXd u0 = burgers::initial_condition({{2.0, 1, 0.0}, {0.5, 2, std::numbers::pi / 2}}, 4, 1.0);
    CHECK(u0[0] == doctest::Approx(0.5));
    CHECK(u0[1] == doctest::Approx(2.0 - 0.5));
    CHECK(u0[2] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(u0[3] == doctest::Approx(-2.0 - 0.5));
  }

  TEST_CASE("constant state is steady") {
    const BurgersConfig cfg;
    const SpaceTimeField u = burgers::solve(Eigen::VectorXd::Constant(cfg.nx, 0.4), cfg);
    CHECK((u.array() - 0.4).abs().maxCoeff() < 1e-13);
    CHECK(burgers::residual(u, cfg).cwiseAbs().maxCoeff() < 1e-12);
  }

  TEST_CASE("mass is conserved and energy decays") {
    const BurgersConfig cfg;
    const Eigen::VectorXd u0 = burgers::initial_condition({{0.8, 1, 0.3}, {0.6, 5, 1.1}}, cfg.nx, cfg.length);
    const SpaceTimeField u = burgers::solve(u0, cfg);
    const double mass0 = u.row(0).sum();
    double energy = u.row(0).squaredNorm();
    for (int j = 1; j < cfg.nt; ++j) {
      CHECK(std::abs(u.row(j).sum() - mass0) < 1e-11);
      const double e = u.row(j).squaredNorm();
      CHECK(e <= energy * (1.0 + 1e-12));
      energy = e;
    }
  }

  TEST_CASE("invalid configs") {
    BurgersConfig cfg;
    cfg.nu = 0.0;
    CHECK_THROWS_AS(burgers::validate(cfg), Error);
    cfg = {};
    CHECK_THROWS_AS(burgers::solve(Eigen::VectorXd::Zero(cfg.nx + 1), cfg), Error);
    Eigen::VectorXd bad = Eigen::VectorXd::Zero(cfg.nx);
    bad[3] = std::nan("");
    CHECK_THROWS_AS(burgers::solve(bad, cfg), Error);
  }

  TEST_CASE("residual of a linear ramp in time is the slope") {
    const BurgersConfig cfg = small_config();
    SpaceTimeField u(cfg.nt, cfg.nx);
    for (int j = 0; j < cfg.nt; ++j) u.row(j).setConstant(0.7 * j * cfg.dt);
    CHECK((burgers::residual(u, cfg).array() - 0.7).abs().maxCoeff() < 1e-12);
    CHECK(burgers::residual(SpaceTimeField::Constant(cfg.nt, cfg.nx, -1.3), cfg).cwiseAbs().maxCoeff() < 1e-12);
  }

  TEST_CASE("residual gradient matches finite differences") {
    const BurgersConfig cfg = small_config();
    Rng rng(5);
    for (int trial = 0; trial < 5; ++trial) {
      SpaceTimeField u(cfg.nt, cfg.nx);
      Eigen::Map<Eigen::VectorXd>(u.data(), u.size()) = testing::normals(rng, u.size());
      const SpaceTimeField g = burgers::residual_gradient(u, cfg);
      const Eigen::VectorXd flat = Eigen::Map<const Eigen::VectorXd>(g.data(), g.size());
      const Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(u.data(), u.size());
      const Eigen::VectorXd fd = testing::fd_gradient(
          [&](const Eigen::VectorXd& v) {
            SpaceTimeField w(cfg.nt, cfg.nx);
            Eigen::Map<Eigen::VectorXd>(w.data(), w.size()) = v;
            return burgers::residual_sq_norm(w, cfg);
          },
          x, 1e-5);
      CHECK(testing::max_rel_err(flat, fd, 1e-8) < 1e-5);
    }
  }

  TEST_CASE("residual stencil is local") {
    const BurgersConfig cfg = small_config();
    Rng rng(6);
    SpaceTimeField u(cfg.nt, cfg.nx);
    Eigen::Map<Eigen::VectorXd>(u.data(), u.size()) = testing::normals(rng, u.size());
    const SpaceTimeField r0 = burgers::residual(u, cfg);
    const int tj = 4, xi = 7;
    u(tj, xi) += 0.5;
    const SpaceTimeField dr = burgers::residual(u, cfg) - r0;
    for (int j = 0; j < cfg.nt; ++j)
      for (int i = 0; i < cfg.nx; ++i)
        if (std::abs(j - tj) > 1 || std::abs(i - xi) > 1) CHECK(dr(j, i) == 0.0);
    CHECK(dr(tj, xi) != 0.0);
  }

  TEST_CASE("dataset generation is deterministic") {
    burgers::BurgersDatasetSpec spec;
    spec.count = 3;
    spec.seed = 4;
    const auto a = burgers::generate_burgers_samples(spec);
    const auto b = burgers::generate_burgers_samples(spec);
    for (int k = 0; k < 3; ++k) {
      CHECK(a[k].u == b[k].u);
      CHECK(a[k].modes.size() == 2);
      const Eigen::VectorXd u0 = burgers::initial_condition(a[k].modes, spec.config.nx, spec.config.length);
      CHECK((a[k].u.row(0).transpose() - u0).cwiseAbs().maxCoeff() == 0.0);
    }
    CHECK(a[0].u != a[1].u);
  }

  TEST_CASE("solver residual shrinks under refinement for a smooth state") {
    auto rms = [](int nx, double dt) {
      BurgersConfig cfg;
      cfg.nx = nx;
      cfg.dt = dt;
      cfg.nt = static_cast<int>(std::lround(0.32 / dt)) + 1;
      cfg.nu = 0.05;
      const SpaceTimeField u = burgers::solve(burgers::initial_condition({{0.3, 1, 0.2}}, nx, 1.0), cfg);
      return std::sqrt(burgers::residual(u, cfg).squaredNorm() / u.size());
    };
    const double coarse = rms(32, 0.02), fine = rms(64, 0.01);
    CHECK(fine < 0.6 * coarse);
  }
}
