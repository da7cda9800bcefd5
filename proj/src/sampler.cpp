#include "physgen/sampler.hpp"

#include <cmath>
#include <sstream>

#include "physgen/darcy.hpp"
#include "physgen/error.hpp"
#include "physgen/parallel.hpp"

namespace physgen::sampling {

using Eigen::MatrixXd;
using Eigen::VectorXd;

void validate(const SamplerConfig& cfg) {
  require(cfg.tau >= 1, "sampler: tau must be at least 1");
  require(cfg.N >= 0 && cfg.N <= cfg.tau, "sampler: N must lie in [0, tau]");
  require(cfg.M >= 0, "sampler: M must be nonnegative");
  require(std::isfinite(cfg.eps.value) && cfg.eps.value > 0.0, "sampler: consistency step size must be positive");
  diffusion::validate(cfg.schedule);
}

Standardizer Standardizer::identity(int dim) { return {VectorXd::Zero(dim), VectorXd::Ones(dim)}; }

VectorXd Standardizer::to_physical(const VectorXd& y) const { return mean + scale.cwiseProduct(y); }

VectorXd Standardizer::to_model(const VectorXd& x) const { return (x - mean).cwiseQuotient(scale); }

ConsistencyContext darcy_context(const GridSpec& grid, const ScalarField& source) {
  require(source.grid() == grid, "darcy context: source grid mismatch");
  const Eigen::Index n2 = grid.size();
  ConsistencyContext ctx;
  ctx.residual_sq = [grid, source, n2](const VectorXd& x) {
    return darcy::residual_sq_norm(ScalarField(grid, x.tail(n2)), ScalarField(grid, x.head(n2)), source);
  };
  ctx.gradient = [grid, source, n2](const VectorXd& x) {
    VectorXd g = VectorXd::Zero(2 * n2);
    g.head(n2) = darcy::residual_gradient(ScalarField(grid, x.tail(n2)), ScalarField(grid, x.head(n2)), source).values();
    return g;
  };
  ctx.mask = VectorXd::Zero(2 * n2);
  ctx.mask.head(n2).setOnes();
  return ctx;
}

ConsistencyContext burgers_context(const burgers::BurgersConfig& cfg) {
  burgers::validate(cfg);
  const int nt = cfg.nt, nx = cfg.nx;
  auto slab = [nt, nx](const VectorXd& x) { return burgers::SpaceTimeField(Eigen::Map<const burgers::SpaceTimeField>(x.data(), nt, nx)); };
  ConsistencyContext ctx;
  ctx.residual_sq = [cfg, slab](const VectorXd& x) { return burgers::residual_sq_norm(slab(x), cfg); };
  ctx.gradient = [cfg, slab, nt, nx](const VectorXd& x) {
    const burgers::SpaceTimeField g = burgers::residual_gradient(slab(x), cfg);
    return VectorXd(Eigen::Map<const VectorXd>(g.data(), static_cast<Eigen::Index>(nt) * nx));
  };
  ctx.mask = VectorXd::Ones(static_cast<Eigen::Index>(nt) * nx);
  return ctx;
}

namespace {

void check_score(const MatrixXd& s, Eigen::Index rows, Eigen::Index cols, double t) {
  if (s.rows() != rows || s.cols() != cols) fail(ErrorCode::invalid_argument, "score output shape mismatch");
  if (!s.allFinite()) {
    std::ostringstream msg;
    msg << "non-finite score at t = " << t;
    fail(ErrorCode::diverged, msg.str());
  }
}

// y <- y - [-beta/2 y - c beta s] dt (+ sqrt(beta dt) z), c = 1 (SDE) or 1/2 (ODE)
void reverse_update(Eigen::Ref<VectorXd> y, const Eigen::Ref<const VectorXd>& s, double b, double dt, double score_coeff,
                    const VectorXd* z) {
  y -= (-0.5 * b * y - score_coeff * b * s) * dt;
  if (z) y += std::sqrt(b * dt) * *z;
}

void forward_update(Eigen::Ref<VectorXd> y, double b, double dt, const VectorXd& z) {
  y += -0.5 * b * y * dt;
  y += std::sqrt(b * dt) * z;
}

}  // namespace

VectorXd em_reverse_step(const VectorXd& y, double t, double dt, const VectorScoreFn& score, const VectorXd& z,
                         const diffusion::VPSchedule& sched) {
  require(dt > 0.0, "em_reverse_step: dt must be positive");
  require(z.size() == y.size(), "em_reverse_step: noise dimension mismatch");
  const VectorXd s = score(y, t);
  check_score(s, y.size(), 1, t);
  VectorXd out = y;
  reverse_update(out, s, diffusion::beta(t, sched), dt, 1.0, &z);
  return out;
}

VectorXd pf_ode_step(const VectorXd& y, double t, double dt, const VectorScoreFn& score,
                     const diffusion::VPSchedule& sched) {
  require(dt > 0.0, "pf_ode_step: dt must be positive");
  const VectorXd s = score(y, t);
  check_score(s, y.size(), 1, t);
  VectorXd out = y;
  reverse_update(out, s, diffusion::beta(t, sched), dt, 0.5, nullptr);
  return out;
}

VectorXd em_forward_step(const VectorXd& y, double t, double dt, const VectorXd& z, const diffusion::VPSchedule& sched) {
  require(z.size() == y.size(), "em_forward_step: noise dimension mismatch");
  VectorXd out = y;
  forward_update(out, diffusion::beta(t, sched), dt, z);
  return out;
}

bool consistency_step(Eigen::Ref<VectorXd> y, const ConsistencyContext& ctx, const Standardizer& stdz,
                      const EpsRule& rule, const VectorXd* extra_mask) {
  require(ctx.mask.size() == y.size() && stdz.mean.size() == y.size(), "consistency_step: dimension mismatch");
  const VectorXd x = stdz.to_physical(y);
  VectorXd g = ctx.gradient(x).cwiseProduct(ctx.mask);
  if (extra_mask) g = g.cwiseProduct(*extra_mask);
  if (!g.allFinite()) fail(ErrorCode::diverged, "consistency_step: non-finite residual gradient");
  double eps = rule.value;
  if (rule.kind != EpsRule::Kind::fixed) {
    const double peak = g.cwiseAbs().maxCoeff();
    if (peak == 0.0) return false;
    eps = rule.value / peak;
  }
  for (Eigen::Index k = 0; k < y.size(); ++k) {
    if (g[k] != 0.0) y[k] -= eps * g[k] / stdz.scale[k];
  }
  return true;
}

SampleResult sample_loop(const ScoreFn& score, const SamplerConfig& cfg, const ConsistencyContext* ctx,
                         const Standardizer& stdz, int count, const LoopHooks& hooks) {
  validate(cfg);
  require(count >= 1, "sample_loop: count must be positive");
  require(stdz.mean.size() == stdz.scale.size() && stdz.mean.size() >= 1, "sample_loop: invalid standardizer");
  if ((cfg.N > 0 || cfg.M > 0) && !ctx) fail(ErrorCode::invalid_argument, "sample_loop: consistency steps need a context");
  require(hooks.resample >= 0, "sample_loop: resampling count must be nonnegative");
  if (hooks.resample > 0 && cfg.equation != Equation::reverse_sde)
    fail(ErrorCode::unsupported, "sample_loop: resampling requires the reverse SDE");

  const Eigen::Index dim = stdz.mean.size();
  const diffusion::VPSchedule& sched = cfg.schedule;
  const double dt = sched.T / cfg.tau;
  const double score_coeff = cfg.equation == Equation::reverse_sde ? 1.0 : 0.5;
  const bool noisy = cfg.equation == Equation::reverse_sde;
  const VectorXd* extra = hooks.consistency_mask ? &*hooks.consistency_mask : nullptr;

  SampleResult result{MatrixXd(dim, count), {}};
  const std::size_t blocks = (static_cast<std::size_t>(count) + kChainBlock - 1) / kChainBlock;
  std::vector<Counters> block_counters(blocks);

  parallel_for(blocks, [&](std::size_t blk) {
    const int first = static_cast<int>(blk) * kChainBlock;
    const int width = std::min(kChainBlock, count - first);
    std::vector<Rng> rngs;
    rngs.reserve(width);
    MatrixXd y(dim, width);
    for (int c = 0; c < width; ++c) {
      rngs.emplace_back(stream_seed(cfg.seed, static_cast<std::uint64_t>(first + c)));
      for (Eigen::Index k = 0; k < dim; ++k) y(k, c) = rngs[c].normal();
    }
    Counters counters;
    VectorXd z(dim);

    auto reverse = [&](double t) {
      const MatrixXd s = score(y, t, first);
      check_score(s, dim, width, t);
      ++counters.score_evals;
      const double b = diffusion::beta(t, sched);
      for (int c = 0; c < width; ++c) {
        if (noisy) rngs[c].fill_normal(z);
        reverse_update(y.col(c), s.col(c), b, dt, score_coeff, noisy ? &z : nullptr);
      }
    };
    auto after = [&](double t) {
      if (!hooks.after_reverse) return;
      for (int c = 0; c < width; ++c) hooks.after_reverse(y.col(c), t, first + c, rngs[c]);
    };
    auto consist = [&] {
      ++counters.residual_evals;
      for (int c = 0; c < width; ++c) consistency_step(y.col(c), *ctx, stdz, cfg.eps, extra);
    };

    for (int i = cfg.tau; i >= 1; --i) {
      const double t = sched.T * i / cfg.tau;
      const double t_next = sched.T * (i - 1) / cfg.tau;
      reverse(t);
      after(t_next);
      for (int r = 0; r < hooks.resample; ++r) {
        const double b = diffusion::beta(t_next, sched);
        for (int c = 0; c < width; ++c) {
          rngs[c].fill_normal(z);
          forward_update(y.col(c), b, dt, z);
        }
        reverse(t);
        after(t_next);
      }
      if (i <= cfg.N) consist();
    }
    for (int k = 0; k < cfg.M; ++k) consist();

    for (int c = 0; c < width; ++c) {
      VectorXd x = stdz.to_physical(y.col(c));
      if (hooks.finalize) hooks.finalize(x, first + c);
      result.samples.col(first + c) = x;
    }
    block_counters[blk] = counters;
  });
  result.counters = block_counters.front();
  return result;
}

}  // namespace physgen::sampling
