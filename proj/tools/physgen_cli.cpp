// physgen command-line front end over the C API.
#include <physgen/physgen.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <set>
#include <string>
#include <utility>

#include "CLI11.hpp"
#include "json.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RuntimeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void check(pg_status st) {
  if (st != PG_OK) throw RuntimeError(std::string(pg_status_name(st)) + ": " + pg_last_error());
}

struct DatasetPtr {
  pg_dataset* p = nullptr;
  DatasetPtr() = default;
  DatasetPtr(DatasetPtr&& o) noexcept : p(std::exchange(o.p, nullptr)) {}
  DatasetPtr(const DatasetPtr&) = delete;
  ~DatasetPtr() { pg_dataset_free(p); }
};

struct ModelPtr {
  pg_model* p = nullptr;
  ModelPtr() = default;
  ModelPtr(const ModelPtr&) = delete;
  ~ModelPtr() { pg_model_free(p); }
};

// Options settable by flag or by the --config file; flags win.
class Binder {
 public:
  Binder(CLI::App* app, std::string command) : app_(app), command_(std::move(command)) {
    app_->add_option("--config", config_path_, "JSON file with option values");
  }

  template <class T>
  CLI::Option* add(const std::string& name, T& var, const std::string& help) {
    CLI::Option* opt = app_->add_option("--" + name, var, help)->capture_default_str();
    apply_.push_back([opt, &var, name](const json& cfg) {
      if (opt->count() == 0 && cfg.contains(name)) var = cfg.at(name).get<T>();
    });
    dump_.push_back([&var, name](json& j) { j[name] = var; });
    names_.insert(name);
    return opt;
  }

  void resolve() {
    if (config_path_.empty()) return;
    std::ifstream in(config_path_);
    if (!in) throw UsageError("cannot read config file " + config_path_);
    json cfg;
    try {
      cfg = json::parse(in);
    } catch (const json::exception& e) {
      throw UsageError("config file is not valid JSON: " + std::string(e.what()));
    }
    if (!cfg.is_object()) throw UsageError("config file must hold a JSON object");
    for (const auto& [key, value] : cfg.items()) {
      if (key == "command") {
        if (value != command_) throw UsageError("config is for command '" + value.dump() + "', not '" + command_ + "'");
      } else if (!names_.count(key)) {
        throw UsageError("unknown config key '" + key + "'");
      }
    }
    try {
      for (auto& f : apply_) f(cfg);
    } catch (const json::exception& e) {
      throw UsageError("bad config value: " + std::string(e.what()));
    }
  }

  void write_resolved(const fs::path& path) const {
    json j = {{"command", command_}};
    for (auto& f : dump_) f(j);
    std::ofstream out(path);
    if (!out) throw RuntimeError("cannot write " + path.string());
    out << j.dump(2) << "\n";
  }

 private:
  CLI::App* app_;
  std::string command_;
  std::string config_path_;
  std::vector<std::function<void(const json&)>> apply_;
  std::vector<std::function<void(json&)>> dump_;
  std::set<std::string> names_;
};

void need(const std::string& value, const char* flag) {
  if (value.empty()) throw UsageError(std::string("missing required option --") + flag);
}

void need_member(const std::string& value, std::initializer_list<const char*> allowed, const char* flag) {
  for (const char* a : allowed)
    if (value == a) return;
  throw UsageError(std::string("invalid value '") + value + "' for --" + flag);
}

fs::path resolved_path_for_dir(const std::string& dir) { return fs::path(dir) / "resolved_config.json"; }
fs::path resolved_path_for_file(const std::string& file) { return fs::path(file + ".resolved.json"); }

DatasetPtr load(const std::string& dir) {
  DatasetPtr d;
  check(pg_dataset_load(dir.c_str(), &d.p));
  return d;
}

void emit_images(const pg_dataset* ds, int count, const std::string& dir) {
  if (count <= 0) return;
  const fs::path img = fs::path(dir) / "images";
  fs::create_directories(img);
  const int channels = std::string(pg_dataset_kind(ds)) == "darcy" ? 2 : 1;
  for (int k = 0; k < std::min(count, pg_dataset_count(ds)); ++k)
    for (int c = 0; c < channels; ++c) {
      const fs::path path = img / ("sample" + std::to_string(k) + "_ch" + std::to_string(c) + ".pgm");
      check(pg_dataset_emit_image(ds, k, c, path.string().c_str()));
    }
}

struct SampleFlags {
  std::string equation = "pf_ode";
  int tau = 2000;
  int N = 0;
  int M = 0;
  std::string eps_rule = "paper";
  double eps = 2e-4;
  std::uint64_t seed = 0;

  void bind(Binder& b) {
    b.add("equation", equation, "pf_ode or reverse_sde");
    b.add("tau", tau, "solver steps");
    b.add("N", N, "consistency steps in the last N solver steps");
    b.add("M", M, "consistency steps after t = 0");
    b.add("eps-rule", eps_rule, "paper, normalized or fixed");
    b.add("eps", eps, "step size (max entry step for paper/normalized)");
    b.add("seed", seed, "sampling seed");
  }

  pg_sample_params params() const {
    need_member(equation, {"pf_ode", "reverse_sde"}, "equation");
    need_member(eps_rule, {"paper", "normalized", "fixed"}, "eps-rule");
    pg_sample_params p;
    pg_sample_params_default(&p);
    p.equation = equation == "pf_ode" ? PG_EQUATION_PF_ODE : PG_EQUATION_REVERSE_SDE;
    p.tau = tau;
    p.N = N;
    p.M = M;
    p.eps_rule = eps_rule == "paper" ? PG_EPS_PAPER : eps_rule == "normalized" ? PG_EPS_NORMALIZED : PG_EPS_FIXED;
    p.eps = eps_rule == "paper" ? 2e-4 : eps;
    p.seed = seed;
    return p;
  }
};

// Wall time lives outside the manifest so reruns stay byte-identical.
void write_timing(const std::string& dir, const pg_counters& c) {
  std::ofstream out(fs::path(dir) / "timing.json");
  out << json{{"wall_time_s", c.wall_time}}.dump() << "\n";
}

double read_timing(const std::string& dir) {
  std::ifstream in(fs::path(dir) / "timing.json");
  if (!in) return 0.0;
  try {
    return json::parse(in).value("wall_time_s", 0.0);
  } catch (const json::exception&) {
    return 0.0;
  }
}

void print_counters(const pg_counters& c) {
  std::cout << "score_evals " << c.score_evals << "\nresidual_evals " << c.residual_evals << "\nwall_time_s "
            << c.wall_time << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"physgen: physics-consistent score-based generative modelling"};
  app.require_subcommand(1);

  // gen-darcy
  pg_darcy_params darcy;
  pg_darcy_params_default(&darcy);
  std::string darcy_out;
  int darcy_images = 0;
  CLI::App* gen_darcy = app.add_subcommand("gen-darcy", "generate a Darcy flow dataset");
  Binder b_darcy(gen_darcy, "gen-darcy");
  b_darcy.add("out", darcy_out, "output dataset directory");
  b_darcy.add("count", darcy.count, "number of samples");
  b_darcy.add("n", darcy.n, "grid nodes per side");
  b_darcy.add("s", darcy.s, "KLE terms");
  b_darcy.add("length-scale", darcy.length_scale, "covariance length scale");
  b_darcy.add("mean-log-k", darcy.mean_log_k, "mean log permeability");
  b_darcy.add("source-rate", darcy.source_rate, "source strength");
  b_darcy.add("source-width", darcy.source_width, "source square width");
  b_darcy.add("seed", darcy.seed, "generation seed");
  b_darcy.add("images", darcy_images, "write PGM images of the first k samples");

  // gen-burgers
  pg_burgers_params bur;
  pg_burgers_params_default(&bur);
  std::string bur_out;
  int bur_images = 0;
  CLI::App* gen_burgers = app.add_subcommand("gen-burgers", "generate a viscous Burgers dataset");
  Binder b_bur(gen_burgers, "gen-burgers");
  b_bur.add("out", bur_out, "output dataset directory");
  b_bur.add("count", bur.count, "number of samples");
  b_bur.add("nx", bur.nx, "spatial cells");
  b_bur.add("nt", bur.nt, "stored time rows");
  b_bur.add("dt", bur.dt, "time between stored rows");
  b_bur.add("nu", bur.nu, "viscosity");
  b_bur.add("length", bur.length, "domain length");
  b_bur.add("modes", bur.modes, "sinusoids per initial condition");
  b_bur.add("max-wavenumber", bur.max_wavenumber, "largest wavenumber");
  b_bur.add("seed", bur.seed, "generation seed");
  b_bur.add("images", bur_images, "write PGM images of the first k samples");

  // train
  pg_train_params tp;
  pg_train_params_default(&tp);
  std::string train_data, train_out, train_base, conditional = "none";
  CLI::App* train = app.add_subcommand("train", "train a score model");
  Binder b_train(train, "train");
  b_train.add("data", train_data, "training dataset directory");
  b_train.add("out", train_out, "checkpoint path");
  b_train.add("conditional", conditional, "none, theta or measurements");
  b_train.add("base", train_base, "unconditional checkpoint for conditional training");
  b_train.add("width", tp.width, "hidden width");
  b_train.add("layers", tp.hidden_layers, "hidden layers");
  b_train.add("time-frequencies", tp.time_frequencies, "time embedding frequencies");
  b_train.add("lr", tp.learning_rate, "learning rate");
  b_train.add("batch-size", tp.batch_size, "minibatch size");
  b_train.add("epochs", tp.epochs, "epochs");
  b_train.add("t-min", tp.t_min, "smallest training time");
  b_train.add("seed", tp.seed, "training seed");
  b_train.add("prior-rank", tp.prior_rank, "directions in the Gaussian-moment prior (0 = none)");

  // sample
  SampleFlags sf;
  std::string s_model, s_data, s_cond, s_out;
  int s_count = 16, s_m = 0, s_images = 0;
  double s_gamma = 1.0;
  std::uint64_t s_mseed = 0;
  CLI::App* sample = app.add_subcommand("sample", "draw samples from a trained model");
  Binder b_sample(sample, "sample");
  b_sample.add("model", s_model, "checkpoint path");
  b_sample.add("data", s_data, "reference dataset (PDE parameters)");
  b_sample.add("conditions", s_cond, "dataset providing conditions for conditional models");
  b_sample.add("out", s_out, "output dataset directory");
  b_sample.add("count", s_count, "number of samples");
  b_sample.add("gamma", s_gamma, "guidance scale");
  b_sample.add("m", s_m, "measured nodes for measurement-conditioned models");
  b_sample.add("measurement-seed", s_mseed, "seed of the measurement locations");
  b_sample.add("images", s_images, "write PGM images of the first k samples");
  sf.bind(b_sample);

  // impute
  SampleFlags imf;
  imf.equation = "reverse_sde";
  std::string i_model, i_data, i_targets, i_out;
  int i_cases = 16, i_m = 0, i_r = 0;
  std::uint64_t i_mseed = 0;
  CLI::App* impute = app.add_subcommand("impute", "reconstruct fields from sparse pressure measurements");
  Binder b_impute(impute, "impute");
  b_impute.add("model", i_model, "unconditional checkpoint path");
  b_impute.add("data", i_data, "reference dataset (PDE parameters)");
  b_impute.add("targets", i_targets, "dataset holding the fields to reconstruct");
  b_impute.add("out", i_out, "output dataset directory");
  b_impute.add("cases", i_cases, "number of targets");
  b_impute.add("m", i_m, "measured pressure nodes");
  b_impute.add("repaint-r", i_r, "resampling pairs per step");
  b_impute.add("measurement-seed", i_mseed, "seed of the measurement locations");
  imf.bind(b_impute);

  // pod
  std::string p_data, p_targets, p_out;
  int p_rank = 16, p_m = 16, p_cases = 16;
  std::uint64_t p_mseed = 0;
  CLI::App* pod = app.add_subcommand("pod", "POD gappy reconstruction baseline");
  Binder b_pod(pod, "pod");
  b_pod.add("data", p_data, "training dataset for the basis");
  b_pod.add("targets", p_targets, "dataset holding the fields to reconstruct");
  b_pod.add("out", p_out, "output dataset directory");
  b_pod.add("rank", p_rank, "basis size");
  b_pod.add("m", p_m, "measured pressure nodes");
  b_pod.add("cases", p_cases, "number of targets");
  b_pod.add("measurement-seed", p_mseed, "seed of the measurement locations");

  // eval
  std::string e_samples, e_data, e_targets, e_csv, e_run;
  CLI::App* eval = app.add_subcommand("eval", "residual and error metrics of generated samples");
  Binder b_eval(eval, "eval");
  b_eval.add("samples", e_samples, "generated dataset directory");
  b_eval.add("data", e_data, "reference dataset (baseline residual)");
  b_eval.add("targets", e_targets, "paired ground-truth dataset");
  b_eval.add("metrics-out", e_csv, "CSV file to append to");
  b_eval.add("run-id", e_run, "run identifier for the CSV row");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << "\n" << app.help();
    return 1;
  }

  try {
    if (gen_darcy->parsed()) {
      b_darcy.resolve();
      need(darcy_out, "out");
      DatasetPtr ds;
      check(pg_generate_darcy(&darcy, &ds.p));
      check(pg_dataset_save(ds.p, darcy_out.c_str()));
      emit_images(ds.p, darcy_images, darcy_out);
      b_darcy.write_resolved(resolved_path_for_dir(darcy_out));
      std::cout << "wrote " << pg_dataset_count(ds.p) << " Darcy samples to " << darcy_out << "\n";
    } else if (gen_burgers->parsed()) {
      b_bur.resolve();
      need(bur_out, "out");
      DatasetPtr ds;
      check(pg_generate_burgers(&bur, &ds.p));
      check(pg_dataset_save(ds.p, bur_out.c_str()));
      emit_images(ds.p, bur_images, bur_out);
      b_bur.write_resolved(resolved_path_for_dir(bur_out));
      std::cout << "wrote " << pg_dataset_count(ds.p) << " Burgers samples to " << bur_out << "\n";
    } else if (train->parsed()) {
      b_train.resolve();
      need(train_data, "data");
      need(train_out, "out");
      need_member(conditional, {"none", "theta", "measurements"}, "conditional");
      tp.condition = conditional == "none"    ? PG_CONDITION_NONE
                     : conditional == "theta" ? PG_CONDITION_THETA
                                              : PG_CONDITION_MEASUREMENTS;
      if (tp.condition != PG_CONDITION_NONE) need(train_base, "base");
      DatasetPtr ds = load(train_data);
      ModelPtr base, model;
      if (tp.condition != PG_CONDITION_NONE) check(pg_model_load(train_base.c_str(), &base.p));
      double loss = 0.0;
      check(pg_train(ds.p, &tp, base.p, &model.p, &loss));
      check(pg_model_save(model.p, train_out.c_str()));
      b_train.write_resolved(resolved_path_for_file(train_out));
      std::cout << "final_loss " << loss << "\n";
    } else if (sample->parsed()) {
      b_sample.resolve();
      need(s_model, "model");
      need(s_data, "data");
      need(s_out, "out");
      pg_sample_params p = sf.params();
      p.count = s_count;
      p.gamma = s_gamma;
      p.m = s_m;
      p.measurement_seed = s_mseed;
      ModelPtr model;
      check(pg_model_load(s_model.c_str(), &model.p));
      DatasetPtr ref = load(s_data), cond, out;
      if (!s_cond.empty()) check(pg_dataset_load(s_cond.c_str(), &cond.p));
      pg_counters counters{};
      check(pg_sample(model.p, ref.p, cond.p, &p, &out.p, &counters));
      check(pg_dataset_save(out.p, s_out.c_str()));
      emit_images(out.p, s_images, s_out);
      b_sample.write_resolved(resolved_path_for_dir(s_out));
      write_timing(s_out, counters);
      print_counters(counters);
    } else if (impute->parsed()) {
      b_impute.resolve();
      need(i_model, "model");
      need(i_data, "data");
      need(i_targets, "targets");
      need(i_out, "out");
      pg_sample_params p = imf.params();
      p.count = i_cases;
      p.m = i_m;
      p.measurement_seed = i_mseed;
      ModelPtr model;
      check(pg_model_load(i_model.c_str(), &model.p));
      DatasetPtr ref = load(i_data), targets = load(i_targets), out;
      pg_counters counters{};
      check(pg_impute(model.p, ref.p, targets.p, &p, i_r, &out.p, &counters));
      check(pg_dataset_save(out.p, i_out.c_str()));
      b_impute.write_resolved(resolved_path_for_dir(i_out));
      write_timing(i_out, counters);
      print_counters(counters);
    } else if (pod->parsed()) {
      b_pod.resolve();
      need(p_data, "data");
      need(p_targets, "targets");
      need(p_out, "out");
      DatasetPtr ref = load(p_data), targets = load(p_targets), out;
      check(pg_pod(ref.p, targets.p, p_rank, p_m, p_cases, p_mseed, &out.p));
      check(pg_dataset_save(out.p, p_out.c_str()));
      b_pod.write_resolved(resolved_path_for_dir(p_out));
      std::cout << "reconstructed " << pg_dataset_count(out.p) << " fields\n";
    } else if (eval->parsed()) {
      b_eval.resolve();
      need(e_samples, "samples");
      need(e_data, "data");
      DatasetPtr samples = load(e_samples), ref = load(e_data), targets;
      if (!e_targets.empty()) check(pg_dataset_load(e_targets.c_str(), &targets.p));
      pg_metrics m{};
      check(pg_eval(samples.p, ref.p, targets.p, &m));
      m.wall_time = read_timing(e_samples);
      std::cout << "mean_residual_sq_sum " << m.mean_residual << "\nexcess_residual_sq_sum " << m.excess_residual << "\n";
      if (m.has_pressure_error) std::cout << "pressure_sq_error " << m.pressure_error << "\n";
      if (m.has_permeability_error) std::cout << "permeability_sq_error " << m.permeability_error << "\n";
      if (m.has_rmse) std::cout << "rmse " << m.rmse << "\n";
      std::cout << "score_evals " << m.score_evals << "\nresidual_evals " << m.residual_evals << "\n";
      if (!e_csv.empty()) {
        check(pg_metrics_append_csv(&m, e_run.c_str(), e_csv.c_str()));
        b_eval.write_resolved(resolved_path_for_file(e_csv));
      }
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
