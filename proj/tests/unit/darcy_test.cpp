#include <cmath>
#include <numbers>

#include "doctest.h"
#include "physgen/darcy.hpp"
#include "physgen/error.hpp"
#include "physgen/kle.hpp"
#include "support.hpp"

using namespace physgen;
using darcy::SourceSpec;

namespace {

ScalarField random_positive(const GridSpec& g, Rng& rng) {
  Eigen::VectorXd v(g.size());
  for (auto& x : v) x = std::exp(0.5 * rng.normal());
  return ScalarField(g, v);
}

ScalarField manufactured(const GridSpec& g) {
  ScalarField p(g);
  for (int i = 0; i < g.n(); ++i)
    for (int j = 0; j < g.n(); ++j)
      p(i, j) = std::cos(std::numbers::pi * g.coord(i)) * std::cos(std::numbers::pi * g.coord(j));
  return p;
}

double manufactured_error(int n) {
  const GridSpec g(n);
  const ScalarField exact = manufactured(g);
  const ScalarField f(g, 2.0 * std::numbers::pi * std::numbers::pi * exact.values());
  const ScalarField p = darcy::solve_pressure(ScalarField(g, Eigen::VectorXd::Ones(g.size())), f);
  return (p.values() - exact.values()).cwiseAbs().maxCoeff();
}

}  // namespace

TEST_SUITE("darcy") {
  TEST_CASE("source function corners") {
    const GridSpec g(17);
    const SourceSpec src;
    const ScalarField f = darcy::source_function(g, src);
    CHECK(f(0, 0) == src.rate);
    CHECK(f(16, 16) == -src.rate);
    CHECK(f(8, 8) == 0.0);
    CHECK_THROWS_AS(darcy::source_function(g, SourceSpec{-1.0, 0.1}), Error);
    CHECK_THROWS_AS(darcy::source_function(g, SourceSpec{1.0, 0.7}), Error);
  }

  TEST_CASE("system shape and integral row") {
    const GridSpec g(6);
    Rng rng(1);
    const ScalarField K = random_positive(g, rng);
    const darcy::DarcySystem sys = darcy::assemble_system(K, darcy::source_function(g, {}));
    CHECK(sys.matrix.rows() == g.size() + 1);
    CHECK(sys.matrix.cols() == g.size());
    CHECK(sys.rhs.size() == g.size() + 1);
    CHECK(sys.rhs[g.size()] == 0.0);
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(g.size());
    const Eigen::VectorXd applied = sys.matrix * ones;
    CHECK(applied.head(g.size()).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(applied[g.size()] == doctest::Approx(1.0).epsilon(1e-14));
    ScalarField bad = K;
    bad(2, 2) = 0.0;
    CHECK_THROWS_AS(darcy::assemble_system(bad, darcy::source_function(g, {})), Error);
  }

  TEST_CASE("constant permeability interior rows are the negative 5-point Laplacian") {
    const GridSpec g(7);
    const ScalarField K(g, Eigen::VectorXd::Ones(g.size()));
    const darcy::DarcySystem sys = darcy::assemble_system(K, ScalarField(g));
    Rng rng(2);
    const Eigen::VectorXd p = testing::normals(rng, g.size());
    const Eigen::VectorXd ap = sys.matrix * p;
    const double h2 = g.dx() * g.dx();
    for (int i = 1; i < 6; ++i)
      for (int j = 1; j < 6; ++j) {
        const double lap = p[g.index(i + 1, j)] + p[g.index(i - 1, j)] + p[g.index(i, j + 1)] + p[g.index(i, j - 1)] -
                           4 * p[g.index(i, j)];
        CHECK(ap[g.index(i, j)] == doctest::Approx(-lap / h2).epsilon(1e-12));
      }
  }

  TEST_CASE("homogeneous problem has zero solution") {
    const GridSpec g(8);
    const ScalarField p = darcy::solve_pressure(ScalarField(g, Eigen::VectorXd::Ones(g.size())), ScalarField(g));
    CHECK(p.values().cwiseAbs().maxCoeff() < 1e-12);
  }

  TEST_CASE("second-order convergence on a manufactured solution") {
    const double e17 = manufactured_error(17), e33 = manufactured_error(33), e65 = manufactured_error(65);
    CHECK(e17 / e33 >= 3.5);
    CHECK(e17 / e33 <= 4.5);
    CHECK(e33 / e65 >= 3.5);
    CHECK(e33 / e65 <= 4.5);
  }

  TEST_CASE("solver output satisfies the normal equations and zero mean") {
    const GridSpec g(12);
    Rng rng(4);
    const ScalarField K = random_positive(g, rng);
    const ScalarField f = darcy::source_function(g, {});
    const ScalarField p = darcy::solve_pressure(K, f);
    CHECK(std::abs(trapezoid_integral(p)) < 1e-10);
    const darcy::DarcySystem sys = darcy::assemble_system(K, f);
    const Eigen::VectorXd normal = sys.matrix.transpose() * (sys.matrix * p.values() - sys.rhs);
    const double scale = (sys.matrix.transpose() * sys.rhs).cwiseAbs().maxCoeff();
    CHECK(normal.cwiseAbs().maxCoeff() < 1e-8 * scale);
  }

  TEST_CASE("velocity") {
    const GridSpec g(9);
    const ScalarField one(g, Eigen::VectorXd::Ones(g.size()));
    auto [u1, u2] = darcy::velocity(one, ScalarField(g, Eigen::VectorXd::Constant(g.size(), 2.0)));
    CHECK(u1.values().cwiseAbs().maxCoeff() < 1e-12);
    CHECK(u2.values().cwiseAbs().maxCoeff() < 1e-12);

    ScalarField x1(g);
    for (int i = 0; i < 9; ++i)
      for (int j = 0; j < 9; ++j) x1(i, j) = g.coord(i);
    auto [v1, v2] = darcy::velocity(one, x1);
    CHECK((v1.values().array() + 1.0).abs().maxCoeff() < 1e-12);
    CHECK(v2.values().cwiseAbs().maxCoeff() < 1e-12);

    Rng rng(6);
    const ScalarField K = random_positive(g, rng);
    const ScalarField p(g, testing::normals(rng, g.size()));
    auto [a1, a2] = darcy::velocity(K, p);
    auto [b1, b2] = darcy::velocity(ScalarField(g, 2.0 * K.values()), p);
    CHECK((b1.values() - 2.0 * a1.values()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((b2.values() - 2.0 * a2.values()).cwiseAbs().maxCoeff() < 1e-12);
  }

  TEST_CASE("residual vanishes on constant pressure") {
    const GridSpec g(8);
    Rng rng(7);
    const ScalarField K = random_positive(g, rng);
    const ScalarField p(g, Eigen::VectorXd::Constant(g.size(), 0.3));
    CHECK(darcy::residual(K, p, ScalarField(g)).values().cwiseAbs().maxCoeff() < 1e-10);
  }

  TEST_CASE("residual of a smooth field converges at second order") {
    // p = cos(pi x1) cos(pi x2) with K = exp(x1): r = K lap p + K_x1 p_x1 + f, f chosen to cancel
    auto max_residual = [](int n) {
      const GridSpec g(n);
      ScalarField K(g), p(g), f(g);
      const double pi = std::numbers::pi;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          const double x = g.coord(i), y = g.coord(j);
          K(i, j) = std::exp(x);
          p(i, j) = std::cos(pi * x) * std::cos(pi * y);
          const double lap = -2 * pi * pi * p(i, j);
          const double px = -pi * std::sin(pi * x) * std::cos(pi * y);
          f(i, j) = -(K(i, j) * lap + K(i, j) * px);
        }
      return darcy::residual(K, p, f).values().cwiseAbs().maxCoeff();
    };
    const double r16 = max_residual(16), r31 = max_residual(31), r61 = max_residual(61);
    CHECK(r16 / r31 > 3.0);
    CHECK(r31 / r61 > 3.5);
  }

  TEST_CASE("residual gradient matches finite differences") {
    const GridSpec g(8);
    Rng rng(8);
    const ScalarField f = darcy::source_function(g, {});
    for (int trial = 0; trial < 10; ++trial) {
      const ScalarField K = random_positive(g, rng);
      const ScalarField p(g, 0.1 * testing::normals(rng, g.size()));
      const Eigen::VectorXd grad = darcy::residual_gradient(K, p, f).values();
      const Eigen::VectorXd fd = testing::fd_gradient(
          [&](const Eigen::VectorXd& x) { return darcy::residual_sq_norm(K, ScalarField(g, x), f); }, p.values(), 1e-6);
      CHECK(testing::max_rel_err(grad, fd, 1e-8) < 1e-4);
    }
  }

  TEST_CASE("residual gradient is linear in pressure without source") {
    const GridSpec g(8);
    Rng rng(9);
    const ScalarField K = random_positive(g, rng);
    const ScalarField p(g, testing::normals(rng, g.size()));
    const ScalarField zero(g);
    const Eigen::VectorXd g1 = darcy::residual_gradient(K, p, zero).values();
    const Eigen::VectorXd g3 = darcy::residual_gradient(K, ScalarField(g, 3.0 * p.values()), zero).values();
    CHECK((g3 - 3.0 * g1).cwiseAbs().maxCoeff() < 1e-10 * std::max(1.0, g3.cwiseAbs().maxCoeff()));
    const ScalarField c(g, Eigen::VectorXd::Constant(g.size(), 1.0));
    CHECK(darcy::residual_gradient(K, c, zero).values().cwiseAbs().maxCoeff() < 1e-9);
  }

  TEST_CASE("derivative matrices are exact on quadratics") {
    const int n = 7;
    const double h = 1.0 / (n - 1);
    const RowMatrix d1 = darcy::first_derivative_matrix(n, h), d2 = darcy::second_derivative_matrix(n, h);
    Eigen::VectorXd q(n), dq(n);
    for (int i = 0; i < n; ++i) {
      const double x = i * h;
      q[i] = 3 * x * x - x + 2;
      dq[i] = 6 * x - 1;
    }
    CHECK((d1 * q - dq).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(((d2 * q).array() - 6.0).abs().maxCoeff() < 1e-9);
    CHECK_THROWS_AS(darcy::second_derivative_matrix(3, 0.5), Error);
  }

  TEST_CASE("dataset residual baseline at n = 16") {
    kle::DarcyDatasetSpec spec;
    spec.count = 8;
    spec.seed = 21;
    const auto samples = kle::generate_darcy_samples(spec);
    const GridSpec g(16);
    const ScalarField f = darcy::source_function(g, spec.source);
    for (const auto& s : samples) {
      const ScalarField r = darcy::residual(s.permeability, s.pressure, f);
      // solver and residual share interior stencils; boundary stencils differ on purpose
      double interior = 0.0;
      for (int i = 1; i < 15; ++i)
        for (int j = 1; j < 15; ++j) interior = std::max(interior, std::abs(r(i, j)));
      const double boundary = r.values().cwiseAbs().maxCoeff();
      CHECK(interior < 1e-2 * boundary);
      CHECK(boundary > 0.0);
    }
  }
}
