#include "physgen/pipeline.hpp"

#include <chrono>
#include <numeric>

#include "physgen/error.hpp"

namespace physgen::pipeline {

using Eigen::MatrixXd;
using Eigen::VectorXd;

std::string to_string(Condition c) {
  switch (c) {
    case Condition::none: return "none";
    case Condition::theta: return "theta";
    case Condition::measurements: return "measurements";
  }
  return "none";
}

Condition parse_condition(const std::string& name) {
  if (name == "none") return Condition::none;
  if (name == "theta") return Condition::theta;
  if (name == "measurements") return Condition::measurements;
  fail(ErrorCode::invalid_argument, "unknown condition '" + name + "' (expected none, theta or measurements)");
}

namespace {

sampling::Standardizer model_standardizer(const io::Model& model, const io::Problem& problem) {
  return model.meta.channels.empty() ? problem.stdz : io::channel_standardizer(model.meta.channels);
}

MatrixXd standardize(const MatrixXd& data, const sampling::Standardizer& s) {
  return ((data.colwise() - s.mean).array().colwise() / s.scale.array()).matrix();
}

io::Dataset output_like(const io::Dataset& reference, MatrixXd data, std::uint64_t seed, nlohmann::json run) {
  io::Dataset out;
  out.kind = reference.kind;
  out.seed = seed;
  out.params = reference.params;
  out.params["run"] = std::move(run);
  out.channels = reference.channels;
  out.data = std::move(data);
  return out;
}

nlohmann::json sampler_json(const sampling::SamplerConfig& c) {
  const char* rule = c.eps.kind == sampling::EpsRule::Kind::paper        ? "paper"
                     : c.eps.kind == sampling::EpsRule::Kind::normalized ? "normalized"
                                                                         : "fixed";
  return {{"equation", c.equation == sampling::Equation::pf_ode ? "pf_ode" : "reverse_sde"},
          {"tau", c.tau},
          {"N", c.N},
          {"M", c.M},
          {"eps_rule", rule},
          {"eps", c.eps.value},
          {"seed", c.seed}};
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

VectorXd measurement_condition(const io::Problem& problem, const VectorXd& state, const std::vector<int>& indices) {
  const int size = problem.primary_size;
  VectorXd c = VectorXd::Zero(2 * size);
  for (int idx : indices) {
    require(idx >= 0 && idx < size, "measurement index out of range");
    c[idx] = 1.0;
    c[size + idx] = (state[idx] - problem.stdz.mean[idx]) / problem.stdz.scale[idx];
  }
  return c;
}

io::Model train_model(const io::Dataset& ds, const TrainOptions& opts, const io::Model* base, nn::TrainReport* report) {
  require(ds.count() >= 1, "train: empty dataset");
  const io::Problem problem = io::make_problem(ds);

  if (opts.condition == Condition::none) {
    nn::Architecture arch = opts.arch;
    arch.dim = static_cast<int>(ds.dim());
    const MatrixXd y = standardize(ds.data, problem.stdz);
    std::optional<nn::GaussianPrior> prior;
    if (opts.prior_rank > 0 && ds.count() >= 2) prior = nn::fit_gaussian_prior(y, opts.prior_rank);
    nn::ScoreNetwork net = nn::train_unconditional(y, arch, opts.schedule, opts.train, report, prior ? &*prior : nullptr);
    io::CheckpointMeta meta{io::data_hash(ds), opts.train.seed, ds.channels, "none", nlohmann::json::object()};
    return io::Model{std::move(net), std::nullopt, std::move(meta)};
  }

  if (!base || base->augmented) fail(ErrorCode::invalid_argument, "conditional training needs an unconditional base model");
  require(base->base.architecture().dim == ds.dim(), "base model dimension does not match the dataset");
  const sampling::Standardizer stdz = model_standardizer(*base, problem);
  const MatrixXd y = standardize(ds.data, stdz);
  io::Problem scaled = problem;
  scaled.stdz = stdz;

  nn::ConditionSource source;
  int cond_dim = 0;
  if (opts.condition == Condition::theta) {
    require(ds.theta.cols() == ds.count() && ds.theta.rows() >= 1, "theta conditioning needs KLE coefficients");
    cond_dim = static_cast<int>(ds.theta.rows());
    source = [&ds](const std::vector<int>& members, Rng&) {
      MatrixXd c(ds.theta.rows(), static_cast<Eigen::Index>(members.size()));
      for (std::size_t k = 0; k < members.size(); ++k) c.col(static_cast<Eigen::Index>(k)) = ds.theta.col(members[k]);
      return c;
    };
  } else {
    const int size = problem.primary_size;
    cond_dim = 2 * size;
    source = [&ds, &scaled, size](const std::vector<int>& members, Rng& rng) {
      MatrixXd c(2 * size, static_cast<Eigen::Index>(members.size()));
      std::vector<int> order(size);
      for (std::size_t k = 0; k < members.size(); ++k) {
        const int m = rng.uniform_int(0, size);
        std::iota(order.begin(), order.end(), 0);
        for (int i = 0; i < m; ++i) std::swap(order[i], order[rng.uniform_int(i, size - 1)]);
        c.col(static_cast<Eigen::Index>(k)) = measurement_condition(
            scaled, ds.data.col(members[k]), std::vector<int>(order.begin(), order.begin() + m));
      }
      return c;
    };
  }
  nn::ConditionalAugmentation aug = nn::train_conditional(y, source, cond_dim, base->base, opts.train, report);
  io::CheckpointMeta meta = base->meta;
  meta.condition = to_string(opts.condition);
  meta.extra["condition_seed"] = opts.train.seed;
  return io::Model{base->base, std::move(aug), std::move(meta)};
}

sampling::ScoreFn make_score(const io::Model& model, const SampleOptions& opts, const io::Problem& problem) {
  const nn::ScoreNetwork* net = &model.base;
  if (!model.augmented) {
    return [net](const MatrixXd& y, double t, int) { return net->forward(y, VectorXd::Constant(y.cols(), t)); };
  }
  const nn::ConditionalAugmentation* aug = &*model.augmented;
  if (!opts.conditions) fail(ErrorCode::invalid_argument, "conditional sampling needs a conditions dataset");
  const io::Dataset& cds = *opts.conditions;
  require(cds.count() >= opts.count, "conditions dataset has fewer samples than requested chains");
  auto cond = std::make_shared<MatrixXd>(aug->condition_dim(), opts.count);
  if (model.meta.condition == "theta") {
    require(cds.theta.rows() == aug->condition_dim(), "conditions dataset has no matching KLE coefficients");
    *cond = cds.theta.leftCols(opts.count);
  } else if (model.meta.condition == "measurements") {
    require(opts.m >= 0 && opts.m <= problem.primary_size, "measurement count out of range");
    io::Problem scaled = problem;
    scaled.stdz = model_standardizer(model, problem);
    std::vector<int> order = inverse::measurement_order(problem.primary_size, opts.measurement_seed);
    order.resize(opts.m);
    for (int k = 0; k < opts.count; ++k) cond->col(k) = measurement_condition(scaled, cds.data.col(k), order);
  } else {
    fail(ErrorCode::invalid_argument, "unknown model condition '" + model.meta.condition + "'");
  }
  const double gamma = opts.gamma;
  return [net, aug, cond, gamma](const MatrixXd& y, double t, int first) {
    const VectorXd tv = VectorXd::Constant(y.cols(), t);
    MatrixXd c = aug->forward(y, tv, cond->middleCols(first, y.cols()));
    if (gamma == 1.0) return c;
    return nn::cfg_score(c, net->forward(y, tv), gamma);
  };
}

SampleOutput run_sample(const io::Model& model, const io::Dataset& reference, const SampleOptions& opts) {
  const io::Problem problem = io::make_problem(reference);
  require(model.base.architecture().dim == reference.dim(), "model dimension does not match the reference dataset");
  require(opts.count >= 1, "sample count must be positive");
  const auto start = std::chrono::steady_clock::now();
  const sampling::ScoreFn score = make_score(model, opts, problem);
  sampling::LoopHooks hooks;
  hooks.finalize = problem.finalize;
  const sampling::SampleResult res =
      sampling::sample_loop(score, opts.sampler, &problem.ctx, model_standardizer(model, problem), opts.count, hooks);
  nlohmann::json run = sampler_json(opts.sampler);
  run["method"] = "sample";
  run["condition"] = model.meta.condition;
  run["gamma"] = opts.gamma;
  run["m"] = opts.m;
  run["score_evals"] = res.counters.score_evals;
  run["residual_evals"] = res.counters.residual_evals;
  return {output_like(reference, res.samples, opts.sampler.seed, run), res.counters, seconds_since(start)};
}

SampleOutput run_impute(const io::Model& model, const io::Dataset& reference, const io::Dataset& targets,
                        const ImputeOptions& opts) {
  if (opts.sampler.equation != sampling::Equation::reverse_sde)
    fail(ErrorCode::unsupported,
         "imputation requires the reverse SDE: known dimensions are drawn from the closed-form forward kernel, "
         "while the probability-flow ODE would need a full forward ODE solve per step, which is prohibitively "
         "expensive");
  if (model.augmented) fail(ErrorCode::invalid_argument, "imputation uses an unconditional model");
  require(targets.kind == reference.kind && targets.dim() == reference.dim(), "targets do not match the reference");
  require(opts.cases >= 1 && opts.cases <= targets.count(), "case count out of range");
  require(model.base.architecture().dim == reference.dim(), "model dimension does not match the reference dataset");
  const io::Problem problem = io::make_problem(reference);
  const auto start = std::chrono::steady_clock::now();
  const inverse::MeasurementSet meas = inverse::select_measurements(
      targets.data.topRows(problem.primary_size).leftCols(opts.cases), opts.m, opts.measurement_seed);
  const sampling::SampleResult res =
      inverse::repaint_sample(make_score(model, {}, problem), opts.sampler, meas, &problem.ctx,
                              model_standardizer(model, problem), opts.cases, opts.repaint_r, problem.finalize);
  nlohmann::json run = sampler_json(opts.sampler);
  run["method"] = "impute";
  run["m"] = opts.m;
  run["r"] = opts.repaint_r;
  run["measurement_seed"] = opts.measurement_seed;
  run["score_evals"] = res.counters.score_evals;
  run["residual_evals"] = res.counters.residual_evals;
  return {output_like(reference, res.samples, opts.sampler.seed, run), res.counters, seconds_since(start)};
}

io::Dataset run_pod(const io::Dataset& reference, const io::Dataset& targets, int rank, int m, int cases,
                    std::uint64_t measurement_seed) {
  require(targets.kind == reference.kind && targets.dim() == reference.dim(), "targets do not match the reference");
  require(cases >= 1 && cases <= targets.count(), "case count out of range");
  const io::Problem problem = io::make_problem(reference);
  require(m >= 1 && m <= problem.primary_size, "measurement count out of range");
  const inverse::PODBasis basis = inverse::pod_basis(reference.data, rank);
  std::vector<int> idx = inverse::measurement_order(problem.primary_size, measurement_seed);
  idx.resize(m);
  MatrixXd out(reference.dim(), cases);
  VectorXd q(m);
  for (int k = 0; k < cases; ++k) {
    for (int i = 0; i < m; ++i) q[i] = targets.data(idx[i], k);
    out.col(k) = inverse::pod_reconstruct(basis, idx, q);
  }
  nlohmann::json run = {{"method", "pod"}, {"rank", rank}, {"m", m}, {"measurement_seed", measurement_seed}};
  return output_like(reference, std::move(out), measurement_seed, run);
}

io::MetricsRow run_eval(const io::Dataset& samples, const io::Dataset& reference, const io::Dataset* targets) {
  require(samples.kind == reference.kind && samples.dim() == reference.dim(), "samples do not match the reference");
  const io::Problem problem = io::make_problem(reference);
  const double baseline = io::mean_residual(problem, reference.data);
  MatrixXd paired;
  if (targets) {
    require(targets->dim() == samples.dim(), "targets do not match the samples");
    require(targets->count() >= samples.count(), "targets have fewer columns than samples");
    paired = targets->data.leftCols(samples.count());
  }
  return io::eval_metrics(problem, samples, baseline, targets ? &paired : nullptr, false);
}

}  // namespace physgen::pipeline
