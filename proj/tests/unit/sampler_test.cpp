#include <cmath>

#include "doctest.h"
#include "physgen/darcy.hpp"
#include "physgen/error.hpp"
#include "physgen/kle.hpp"
#include "physgen/sampler.hpp"
#include "support.hpp"

using namespace physgen;
using namespace physgen::sampling;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

const diffusion::VPSchedule kSched;

// exact score of N(m, v I) in every coordinate
ScoreFn gaussian_score(double m, double v) {
  return [m, v](const MatrixXd& y, double t, int) {
    const auto k = diffusion::kernel_coeffs(t, kSched);
    return ((-(y.array() - k.alpha * m)) / (k.alpha * k.alpha * v + k.sigma2)).matrix().eval();
  };
}

struct DarcyFixture {
  GridSpec grid{8};
  ScalarField source = darcy::source_function(grid, {});
  ConsistencyContext ctx = darcy_context(grid, source);
  VectorXd state;

  DarcyFixture() {
    kle::DarcyDatasetSpec spec;
    spec.count = 1;
    spec.n = 8;
    spec.s = 6;
    spec.seed = 3;
    const auto s = kle::generate_darcy_samples(spec);
    state.resize(2 * grid.size());
    state << s[0].pressure.values(), s[0].permeability.values();
  }
};

}  // namespace

TEST_SUITE("sampler") {
  TEST_CASE("reverse step examples") {
    const VectorScoreFn minus_y = [](const VectorXd& y, double) { return VectorXd(-y); };
    const VectorXd y = VectorXd::Constant(2, 1.0);
    const double b = diffusion::beta(0.5, kSched), dt = 0.01;
    // drift -b/2 y - b s = b/2 at y = 1
    const VectorXd out = em_reverse_step(y, 0.5, dt, minus_y, VectorXd::Zero(2), kSched);
    CHECK(out[0] == doctest::Approx(1.0 - 0.5 * b * dt).epsilon(1e-14));
    const VectorXd noisy = em_reverse_step(y, 0.5, dt, minus_y, VectorXd::Constant(2, 2.0), kSched);
    CHECK(noisy[1] - out[1] == doctest::Approx(2.0 * std::sqrt(b * dt)).epsilon(1e-12));
    // the standard normal is a fixed point of the probability-flow drift
    const VectorXd ode = pf_ode_step(Eigen::Vector2d(0.7, -2.0), 0.8, dt, minus_y, kSched);
    CHECK(ode[0] == doctest::Approx(0.7).epsilon(1e-15));
    CHECK(ode[1] == doctest::Approx(-2.0).epsilon(1e-15));
    const VectorScoreFn zero = [](const VectorXd& v, double) { return VectorXd(VectorXd::Zero(v.size())); };
    CHECK(pf_ode_step(y, 0.5, dt, zero, kSched)[0] == doctest::Approx(1.0 + 0.5 * b * dt));
    CHECK_THROWS_AS(pf_ode_step(y, 0.5, -dt, zero, kSched), Error);
    const VectorScoreFn bad = [](const VectorXd& v, double) { return VectorXd(VectorXd::Constant(v.size(), NAN)); };
    CHECK_THROWS_AS(pf_ode_step(y, 0.5, dt, bad, kSched), Error);
  }

  TEST_CASE("forward step noise variance") {
    Rng rng(31);
    const double t = 0.3, dt = 0.002, b = diffusion::beta(t, kSched);
    const int draws = 40000;
    double sq = 0.0, sum = 0.0;
    for (int i = 0; i < draws; ++i) {
      const double v = em_forward_step(VectorXd::Zero(1), t, dt, testing::normals(rng, 1), kSched)[0];
      sum += v;
      sq += v * v;
    }
    CHECK(std::abs(sum / draws) < 4.0 * std::sqrt(b * dt / draws));
    CHECK(sq / draws == doctest::Approx(b * dt).epsilon(0.03));
    CHECK(em_forward_step(VectorXd::Constant(1, 2.0), t, dt, VectorXd::Zero(1), kSched)[0] ==
          doctest::Approx(2.0 - b * dt));
  }

  TEST_CASE("consistency step lowers the residual and respects the mask") {
    DarcyFixture fx;
    Rng rng(32);
    const Standardizer stdz = Standardizer::identity(static_cast<int>(fx.state.size()));
    VectorXd y = fx.state;
    y.head(fx.grid.size()) += 0.05 * testing::normals(rng, fx.grid.size());
    const double before = fx.ctx.residual_sq(y);
    const VectorXd y0 = y;
    CHECK(consistency_step(y, fx.ctx, stdz, EpsRule::normalized(1e-4)));
    CHECK(fx.ctx.residual_sq(y) < before);
    for (int k = fx.grid.size(); k < y.size(); ++k) CHECK(y[k] == y0[k]);
    // the largest move is exactly the normalized step
    CHECK((y - y0).cwiseAbs().maxCoeff() == doctest::Approx(1e-4).epsilon(1e-10));

    VectorXd extra = VectorXd::Ones(y.size());
    extra.head(10).setZero();
    VectorXd w = y;
    consistency_step(w, fx.ctx, stdz, EpsRule::fixed(1e-9), &extra);
    for (int k = 0; k < 10; ++k) CHECK(w[k] == y[k]);

    VectorXd all_masked = y;
    const VectorXd none = VectorXd::Zero(y.size());
    CHECK_FALSE(consistency_step(all_masked, fx.ctx, stdz, EpsRule::paper_rule(), &none));
    CHECK(all_masked == y);
  }

  TEST_CASE("paper rule keeps the residual nonincreasing on noised solutions") {
    const GridSpec grid{16};
    const ScalarField source = darcy::source_function(grid, {});
    const ConsistencyContext ctx = darcy_context(grid, source);
    kle::DarcyDatasetSpec spec;
    spec.count = 100;
    spec.n = 16;
    spec.seed = 41;
    const auto samples = kle::generate_darcy_samples(spec);
    const Standardizer stdz = Standardizer::identity(2 * grid.size());
    Rng rng(42);
    int monotone = 0;
    for (const auto& s : samples) {
      VectorXd y(2 * grid.size());
      y << s.pressure.values(), s.permeability.values();
      y.head(grid.size()) += 0.01 * testing::normals(rng, grid.size());
      double last = ctx.residual_sq(y);
      bool ok = true;
      for (int step = 0; step < 10; ++step) {
        consistency_step(y, ctx, stdz, EpsRule::paper_rule());
        const double now = ctx.residual_sq(y);
        ok = ok && now <= last;
        last = now;
      }
      monotone += ok;
    }
    CHECK(monotone >= 95);
  }

  TEST_CASE("consistency step works in physical units") {
    DarcyFixture fx;
    const Eigen::Index d = fx.state.size();
    Standardizer stdz{VectorXd::Constant(d, 0.5), VectorXd::Constant(d, 4.0)};
    const VectorXd y = stdz.to_model(fx.state);
    CHECK((stdz.to_physical(y) - fx.state).cwiseAbs().maxCoeff() < 1e-14);
    VectorXd moved = y;
    consistency_step(moved, fx.ctx, stdz, EpsRule::fixed(1e-6));
    const VectorXd g = fx.ctx.gradient(fx.state);
    CHECK(((stdz.to_physical(moved) - fx.state) + 1e-6 * g).cwiseAbs().maxCoeff() < 1e-12 * std::max(1.0, g.cwiseAbs().maxCoeff()));
  }

  TEST_CASE("counters and the plain sampler") {
    DarcyFixture fx;
    const int d = static_cast<int>(fx.state.size());
    SamplerConfig cfg;
    cfg.tau = 20;
    cfg.seed = 4;
    const ScoreFn score = gaussian_score(0.0, 1.0);
    const SampleResult plain = sample_loop(score, cfg, nullptr, Standardizer::identity(d), 3);
    CHECK(plain.counters.score_evals == 20);
    CHECK(plain.counters.residual_evals == 0);
    // a context with N = M = 0 changes nothing
    const SampleResult with_ctx = sample_loop(score, cfg, &fx.ctx, Standardizer::identity(d), 3);
    CHECK(with_ctx.samples == plain.samples);

    cfg.N = 5;
    cfg.M = 3;
    cfg.eps = EpsRule::normalized(1e-3);
    const SampleResult cons = sample_loop(score, cfg, &fx.ctx, Standardizer::identity(d), 3);
    CHECK(cons.counters.residual_evals == 8);
    CHECK(cons.counters.score_evals == 20);
    CHECK(cons.samples.bottomRows(fx.grid.size()) == plain.samples.bottomRows(fx.grid.size()));
    CHECK(cons.samples.topRows(fx.grid.size()) != plain.samples.topRows(fx.grid.size()));
    CHECK_THROWS_AS(sample_loop(score, cfg, nullptr, Standardizer::identity(d), 3), Error);
  }

  TEST_CASE("chains are independent of the chain count") {
    SamplerConfig cfg;
    cfg.equation = Equation::reverse_sde;
    cfg.tau = 10;
    cfg.seed = 5;
    const ScoreFn score = gaussian_score(1.0, 0.5);
    const SampleResult a = sample_loop(score, cfg, nullptr, Standardizer::identity(4), 70);
    const SampleResult b = sample_loop(score, cfg, nullptr, Standardizer::identity(4), 5);
    CHECK(a.samples.leftCols(5) == b.samples);
    const SampleResult c = sample_loop(score, cfg, nullptr, Standardizer::identity(4), 70);
    CHECK(a.samples == c.samples);
  }

  TEST_CASE("reverse SDE reaches a Gaussian target") {
    SamplerConfig cfg;
    cfg.equation = Equation::reverse_sde;
    cfg.tau = 400;
    cfg.seed = 6;
    const SampleResult r = sample_loop(gaussian_score(1.5, 0.25), cfg, nullptr, Standardizer::identity(2), 1000);
    const double mean = r.samples.mean();
    const double var = (r.samples.array() - mean).square().mean();
    CHECK(testing::z_score(mean, 1.5, 0.25, 2000) < 4.0);
    CHECK(var == doctest::Approx(0.25).epsilon(0.1));
  }

  TEST_CASE("hooks") {
    SamplerConfig cfg;
    cfg.tau = 6;
    cfg.seed = 7;
    LoopHooks hooks;
    int calls = 0;
    hooks.after_reverse = [&](Eigen::Ref<VectorXd>, double, int, Rng&) { ++calls; };
    hooks.finalize = [](Eigen::Ref<VectorXd> x, int chain) { x.setConstant(chain); };
    const SampleResult r = sample_loop(gaussian_score(0.0, 1.0), cfg, nullptr, Standardizer::identity(2), 3, hooks);
    CHECK(calls == 18);
    CHECK(r.samples(0, 2) == 2.0);
    hooks.resample = 1;
    CHECK_THROWS_AS(sample_loop(gaussian_score(0.0, 1.0), cfg, nullptr, Standardizer::identity(2), 3, hooks), Error);
    cfg.equation = Equation::reverse_sde;
    calls = 0;
    const SampleResult rr = sample_loop(gaussian_score(0.0, 1.0), cfg, nullptr, Standardizer::identity(2), 1, hooks);
    CHECK(rr.counters.score_evals == 12);
    CHECK(calls == 12);
  }

  TEST_CASE("config validation") {
    SamplerConfig cfg;
    cfg.tau = 0;
    CHECK_THROWS_AS(validate(cfg), Error);
    cfg.tau = 10;
    cfg.N = 11;
    CHECK_THROWS_AS(validate(cfg), Error);
    cfg.N = 0;
    cfg.eps = EpsRule::fixed(0.0);
    CHECK_THROWS_AS(validate(cfg), Error);
  }
}
