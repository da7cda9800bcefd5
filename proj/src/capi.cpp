#include <cstring>
#include <exception>
#include <new>
#include <string>

#include "physgen/error.hpp"
#include "physgen/io/image.hpp"
#include "physgen/physgen.h"
#include "physgen/pipeline.hpp"

using namespace physgen;

struct pg_dataset {
  io::Dataset ds;
  std::string kind;
};

struct pg_model {
  io::Model model;
};

namespace {

thread_local std::string last_error;

pg_status to_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument: return PG_ERR_INVALID_ARGUMENT;
    case ErrorCode::io: return PG_ERR_IO;
    case ErrorCode::checksum: return PG_ERR_CHECKSUM;
    case ErrorCode::version: return PG_ERR_VERSION;
    case ErrorCode::solver: return PG_ERR_SOLVER;
    case ErrorCode::diverged: return PG_ERR_DIVERGED;
    case ErrorCode::unsupported: return PG_ERR_UNSUPPORTED;
    case ErrorCode::internal: return PG_ERR_INTERNAL;
  }
  return PG_ERR_INTERNAL;
}

template <class F>
pg_status guarded(F&& body) {
  try {
    body();
    last_error.clear();
    return PG_OK;
  } catch (const Error& e) {
    last_error = e.what();
    return to_status(e.code());
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
    return PG_ERR_INTERNAL;
  } catch (const std::exception& e) {
    last_error = e.what();
    return PG_ERR_INTERNAL;
  }
}

void need(const void* p, const char* what) {
  if (!p) fail(ErrorCode::invalid_argument, std::string(what) + " must not be null");
}

pg_dataset* wrap(io::Dataset ds) {
  auto* h = new pg_dataset{std::move(ds), {}};
  h->kind = io::to_string(h->ds.kind);
  return h;
}

sampling::SamplerConfig sampler_config(const pg_sample_params& p) {
  sampling::SamplerConfig c;
  c.equation = p.equation == PG_EQUATION_PF_ODE ? sampling::Equation::pf_ode : sampling::Equation::reverse_sde;
  if (p.equation != PG_EQUATION_PF_ODE && p.equation != PG_EQUATION_REVERSE_SDE)
    fail(ErrorCode::invalid_argument, "unknown equation");
  c.tau = p.tau;
  c.N = p.N;
  c.M = p.M;
  switch (p.eps_rule) {
    case PG_EPS_PAPER: c.eps = sampling::EpsRule::paper_rule(); break;
    case PG_EPS_NORMALIZED: c.eps = sampling::EpsRule::normalized(p.eps); break;
    case PG_EPS_FIXED: c.eps = sampling::EpsRule::fixed(p.eps); break;
    default: fail(ErrorCode::invalid_argument, "unknown eps rule");
  }
  c.seed = p.seed;
  return c;
}

void fill_counters(pg_counters* out, const pipeline::SampleOutput& res) {
  if (!out) return;
  out->score_evals = res.counters.score_evals;
  out->residual_evals = res.counters.residual_evals;
  out->wall_time = res.wall_time;
}

}  // namespace

extern "C" {

const char* pg_last_error(void) { return last_error.c_str(); }

const char* pg_status_name(pg_status status) {
  switch (status) {
    case PG_OK: return "ok";
    case PG_ERR_INVALID_ARGUMENT: return "invalid argument";
    case PG_ERR_IO: return "io error";
    case PG_ERR_CHECKSUM: return "checksum mismatch";
    case PG_ERR_VERSION: return "version mismatch";
    case PG_ERR_SOLVER: return "solver failure";
    case PG_ERR_DIVERGED: return "diverged";
    case PG_ERR_UNSUPPORTED: return "unsupported";
    case PG_ERR_INTERNAL: return "internal error";
  }
  return "unknown";
}

const char* pg_version(void) { return "0.1.0"; }

void pg_darcy_params_default(pg_darcy_params* out) {
  if (!out) return;
  const kle::DarcyDatasetSpec d;
  *out = {d.count, d.n, d.s, d.covariance.length, d.covariance.mean, d.source.rate, d.source.width, d.seed};
}

void pg_burgers_params_default(pg_burgers_params* out) {
  if (!out) return;
  const burgers::BurgersDatasetSpec b;
  const burgers::BurgersConfig& c = b.config;
  *out = {b.count, c.nx, c.nt, c.dt, c.nu, c.length, b.modes, b.max_wavenumber, b.seed};
}

pg_status pg_generate_darcy(const pg_darcy_params* p, pg_dataset** out) {
  return guarded([&] {
    need(p, "params");
    need(out, "out");
    kle::DarcyDatasetSpec spec;
    spec.count = p->count;
    spec.n = p->n;
    spec.s = p->s;
    spec.covariance.length = p->length_scale;
    spec.covariance.mean = p->mean_log_k;
    spec.source.rate = p->source_rate;
    spec.source.width = p->source_width;
    spec.seed = p->seed;
    *out = wrap(io::make_darcy_dataset(spec));
  });
}

pg_status pg_generate_burgers(const pg_burgers_params* p, pg_dataset** out) {
  return guarded([&] {
    need(p, "params");
    need(out, "out");
    burgers::BurgersDatasetSpec spec;
    spec.count = p->count;
    spec.config.nx = p->nx;
    spec.config.nt = p->nt;
    spec.config.dt = p->dt;
    spec.config.nu = p->nu;
    spec.config.length = p->length;
    spec.modes = p->modes;
    spec.max_wavenumber = p->max_wavenumber;
    spec.seed = p->seed;
    *out = wrap(io::make_burgers_dataset(spec));
  });
}

pg_status pg_dataset_load(const char* dir, pg_dataset** out) {
  return guarded([&] {
    need(dir, "dir");
    need(out, "out");
    *out = wrap(io::load_dataset(dir));
  });
}

pg_status pg_dataset_save(const pg_dataset* ds, const char* dir) {
  return guarded([&] {
    need(ds, "dataset");
    need(dir, "dir");
    io::save_dataset(ds->ds, dir);
  });
}

void pg_dataset_free(pg_dataset* ds) { delete ds; }

int pg_dataset_count(const pg_dataset* ds) { return ds ? ds->ds.count() : 0; }

size_t pg_dataset_dim(const pg_dataset* ds) { return ds ? static_cast<size_t>(ds->ds.dim()) : 0; }

const char* pg_dataset_kind(const pg_dataset* ds) { return ds ? ds->kind.c_str() : ""; }

pg_status pg_dataset_sample(const pg_dataset* ds, int index, double* out, size_t len) {
  return guarded([&] {
    need(ds, "dataset");
    need(out, "out");
    require(index >= 0 && index < ds->ds.count(), "sample index out of range");
    require(len == static_cast<size_t>(ds->ds.dim()), "output length must equal the dataset dimension");
    std::memcpy(out, ds->ds.data.col(index).data(), len * sizeof(double));
  });
}

pg_status pg_dataset_emit_image(const pg_dataset* ds, int index, int channel, const char* path) {
  return guarded([&] {
    need(ds, "dataset");
    need(path, "path");
    require(index >= 0 && index < ds->ds.count(), "sample index out of range");
    require(channel >= 0 && channel < static_cast<int>(ds->ds.channels.size()), "channel index out of range");
    const io::Channel& ch = ds->ds.channels[channel];
    const RowMatrix field = Eigen::Map<const RowMatrix>(
        ds->ds.data.col(index).data() + ds->ds.channel_offset(channel), ch.rows, ch.cols);
    io::emit_field_image(field, path);
  });
}

void pg_train_params_default(pg_train_params* out) {
  if (!out) return;
  const nn::Architecture a;
  const nn::TrainConfig t;
  *out = {a.width, a.hidden_layers, a.time_frequencies, t.learning_rate, t.batch_size, t.epochs, t.t_min, t.seed,
          PG_CONDITION_NONE, pipeline::TrainOptions{}.prior_rank};
}

pg_status pg_train(const pg_dataset* ds, const pg_train_params* p, const pg_model* base, pg_model** out,
                   double* final_loss) {
  return guarded([&] {
    need(ds, "dataset");
    need(p, "params");
    need(out, "out");
    pipeline::TrainOptions opts;
    opts.arch.width = p->width;
    opts.arch.hidden_layers = p->hidden_layers;
    opts.arch.time_frequencies = p->time_frequencies;
    opts.train.learning_rate = p->learning_rate;
    opts.train.batch_size = p->batch_size;
    opts.train.epochs = p->epochs;
    opts.train.t_min = p->t_min;
    opts.train.seed = p->seed;
    opts.prior_rank = p->prior_rank;
    switch (p->condition) {
      case PG_CONDITION_NONE: opts.condition = pipeline::Condition::none; break;
      case PG_CONDITION_THETA: opts.condition = pipeline::Condition::theta; break;
      case PG_CONDITION_MEASUREMENTS: opts.condition = pipeline::Condition::measurements; break;
      default: fail(ErrorCode::invalid_argument, "unknown condition");
    }
    nn::TrainReport report;
    io::Model model = pipeline::train_model(ds->ds, opts, base ? &base->model : nullptr, &report);
    if (final_loss) {
      const std::size_t steps = report.losses.size();
      const std::size_t per_epoch = p->epochs > 0 ? std::max<std::size_t>(1, steps / p->epochs) : steps;
      double sum = 0.0;
      for (std::size_t i = steps - std::min(per_epoch, steps); i < steps; ++i) sum += report.losses[i];
      *final_loss = steps ? sum / static_cast<double>(std::min(per_epoch, steps)) : 0.0;
    }
    *out = new pg_model{std::move(model)};
  });
}

pg_status pg_model_save(const pg_model* model, const char* path) {
  return guarded([&] {
    need(model, "model");
    need(path, "path");
    io::save_checkpoint(model->model, path);
  });
}

pg_status pg_model_load(const char* path, pg_model** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new pg_model{io::load_checkpoint(path)};
  });
}

void pg_model_free(pg_model* model) { delete model; }

pg_status pg_model_base_hash(const pg_model* model, char* out, size_t len) {
  return guarded([&] {
    need(model, "model");
    need(out, "out");
    const std::string h = nn::parameter_hash(model->model.base.parameters());
    require(len > h.size(), "hash buffer too small");
    std::memcpy(out, h.c_str(), h.size() + 1);
  });
}

void pg_sample_params_default(pg_sample_params* out) {
  if (!out) return;
  *out = {PG_EQUATION_PF_ODE, 2000, 0, 0, PG_EPS_PAPER, 2e-4, 0, 1, 1.0, 0, 0};
}

pg_status pg_sample(const pg_model* model, const pg_dataset* reference, const pg_dataset* conditions,
                    const pg_sample_params* p, pg_dataset** out, pg_counters* counters) {
  return guarded([&] {
    need(model, "model");
    need(reference, "reference");
    need(p, "params");
    need(out, "out");
    pipeline::SampleOptions opts;
    opts.sampler = sampler_config(*p);
    opts.count = p->count;
    opts.gamma = p->gamma;
    opts.conditions = conditions ? &conditions->ds : nullptr;
    opts.m = p->m;
    opts.measurement_seed = p->measurement_seed;
    pipeline::SampleOutput res = pipeline::run_sample(model->model, reference->ds, opts);
    fill_counters(counters, res);
    *out = wrap(std::move(res.samples));
  });
}

pg_status pg_impute(const pg_model* model, const pg_dataset* reference, const pg_dataset* targets,
                    const pg_sample_params* p, int repaint_r, pg_dataset** out, pg_counters* counters) {
  return guarded([&] {
    need(model, "model");
    need(reference, "reference");
    need(targets, "targets");
    need(p, "params");
    need(out, "out");
    pipeline::ImputeOptions opts;
    opts.sampler = sampler_config(*p);
    opts.cases = p->count;
    opts.m = p->m;
    opts.repaint_r = repaint_r;
    opts.measurement_seed = p->measurement_seed;
    pipeline::SampleOutput res = pipeline::run_impute(model->model, reference->ds, targets->ds, opts);
    fill_counters(counters, res);
    *out = wrap(std::move(res.samples));
  });
}

pg_status pg_pod(const pg_dataset* reference, const pg_dataset* targets, int rank, int m, int cases,
                 uint64_t measurement_seed, pg_dataset** out) {
  return guarded([&] {
    need(reference, "reference");
    need(targets, "targets");
    need(out, "out");
    *out = wrap(pipeline::run_pod(reference->ds, targets->ds, rank, m, cases, measurement_seed));
  });
}

pg_status pg_eval(const pg_dataset* samples, const pg_dataset* reference, const pg_dataset* targets, pg_metrics* out) {
  return guarded([&] {
    need(samples, "samples");
    need(reference, "reference");
    need(out, "out");
    const io::MetricsRow r = pipeline::run_eval(samples->ds, reference->ds, targets ? &targets->ds : nullptr);
    pg_metrics m{};
    std::strncpy(m.equation, r.equation.c_str(), sizeof m.equation - 1);
    m.tau = r.tau, m.N = r.N, m.M = r.M, m.m = r.m, m.r = r.r;
    m.mean_residual = r.mean_residual;
    m.excess_residual = r.excess_residual;
    m.has_pressure_error = r.pressure_error.has_value();
    m.pressure_error = r.pressure_error.value_or(0.0);
    m.has_permeability_error = r.permeability_error.has_value();
    m.permeability_error = r.permeability_error.value_or(0.0);
    m.has_rmse = r.rmse.has_value();
    m.rmse = r.rmse.value_or(0.0);
    m.score_evals = r.score_evals;
    m.residual_evals = r.residual_evals;
    m.wall_time = r.wall_time;
    *out = m;
  });
}

pg_status pg_metrics_append_csv(const pg_metrics* m, const char* run_id, const char* path) {
  return guarded([&] {
    need(m, "row");
    need(path, "path");
    io::MetricsRow r;
    r.run_id = run_id ? run_id : "";
    r.equation = std::string(m->equation, strnlen(m->equation, sizeof m->equation));
    r.tau = m->tau, r.N = m->N, r.M = m->M, r.m = m->m, r.r = m->r;
    r.mean_residual = m->mean_residual;
    r.excess_residual = m->excess_residual;
    if (m->has_pressure_error) r.pressure_error = m->pressure_error;
    if (m->has_permeability_error) r.permeability_error = m->permeability_error;
    if (m->has_rmse) r.rmse = m->rmse;
    r.score_evals = m->score_evals;
    r.residual_evals = m->residual_evals;
    r.wall_time = m->wall_time;
    io::write_metrics_csv(path, {r});
  });
}

}  // extern "C"
