#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <optional>

#include "physgen/burgers.hpp"
#include "physgen/diffusion.hpp"
#include "physgen/grid.hpp"
#include "physgen/rng.hpp"

namespace physgen::sampling {

enum class Equation { reverse_sde, pf_ode };

/// Consistency step size. `paper` and `normalized` divide by max|grad ||r||^2| so the
/// largest entry moves by exactly `value`; `fixed` multiplies the raw gradient.
struct EpsRule {
  enum class Kind { paper, normalized, fixed };
  Kind kind = Kind::paper;
  double value = 2e-4;

  static EpsRule paper_rule() { return {Kind::paper, 2e-4}; }
  static EpsRule normalized(double max_step) { return {Kind::normalized, max_step}; }
  static EpsRule fixed(double eps) { return {Kind::fixed, eps}; }
};

struct SamplerConfig {
  Equation equation = Equation::pf_ode;
  int tau = 2000;
  int N = 0;
  int M = 0;
  EpsRule eps = EpsRule::paper_rule();
  std::uint64_t seed = 0;
  diffusion::VPSchedule schedule;
};

void validate(const SamplerConfig& cfg);

/// Affine map between the physical state and the standardized state the model sees.
struct Standardizer {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;

  static Standardizer identity(int dim);
  Eigen::VectorXd to_physical(const Eigen::VectorXd& y) const;
  Eigen::VectorXd to_model(const Eigen::VectorXd& x) const;
};

/// Residual of the governing equations on a physical state.
struct ConsistencyContext {
  std::function<double(const Eigen::VectorXd&)> residual_sq;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> gradient;  // of residual_sq
  Eigen::VectorXd mask;                                               // 1 = updated by consistency steps
};

/// Darcy state [pressure; permeability]; only the pressure half is updated.
ConsistencyContext darcy_context(const GridSpec& grid, const ScalarField& source);
/// Burgers state is the row-major nt x nx slab; every entry is updated.
ConsistencyContext burgers_context(const burgers::BurgersConfig& cfg);

/// Score evaluated on standardized states (columns), all at time t. Column k belongs
/// to chain first + k.
using ScoreFn = std::function<Eigen::MatrixXd(const Eigen::MatrixXd& y, double t, int first)>;

/// Vector score function for single-state steps.
using VectorScoreFn = std::function<Eigen::VectorXd(const Eigen::VectorXd& y, double t)>;

Eigen::VectorXd em_reverse_step(const Eigen::VectorXd& y, double t, double dt, const VectorScoreFn& score,
                                const Eigen::VectorXd& z, const diffusion::VPSchedule& sched);
Eigen::VectorXd pf_ode_step(const Eigen::VectorXd& y, double t, double dt, const VectorScoreFn& score,
                            const diffusion::VPSchedule& sched);
/// Euler-Maruyama step of the forward SDE from t to t + dt.
Eigen::VectorXd em_forward_step(const Eigen::VectorXd& y, double t, double dt, const Eigen::VectorXd& z,
                                const diffusion::VPSchedule& sched);

/// One consistency update of the standardized state `y`. Entries outside ctx.mask (and
/// outside `extra_mask` when given) are left bit-identical. Returns false if skipped
/// because the masked gradient vanished.
bool consistency_step(Eigen::Ref<Eigen::VectorXd> y, const ConsistencyContext& ctx, const Standardizer& stdz,
                      const EpsRule& rule, const Eigen::VectorXd* extra_mask = nullptr);

struct Counters {
  long score_evals = 0;     // per chain
  long residual_evals = 0;  // per chain
};

/// Extension points used by the imputation samplers.
struct LoopHooks {
  /// Applied to chain `chain` after every reverse step landing at time t.
  std::function<void(Eigen::Ref<Eigen::VectorXd> y, double t, int chain, Rng& rng)> after_reverse;
  /// Forward/reverse resampling pairs per solver step (reverse SDE only).
  int resample = 0;
  /// Additional consistency mask (1 = may be updated).
  std::optional<Eigen::VectorXd> consistency_mask;
  /// Applied to each finished chain in physical units.
  std::function<void(Eigen::Ref<Eigen::VectorXd> x, int chain)> finalize;
};

struct SampleResult {
  Eigen::MatrixXd samples;  // physical units, one column per chain
  Counters counters;
};

/// Chains run in fixed-size blocks, so results do not depend on the worker count.
inline constexpr int kChainBlock = 32;

SampleResult sample_loop(const ScoreFn& score, const SamplerConfig& cfg, const ConsistencyContext* ctx,
                         const Standardizer& stdz, int count, const LoopHooks& hooks = {});

}  // namespace physgen::sampling
