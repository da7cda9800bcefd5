#include <cstring>
#include <filesystem>
#include <string>
#include <unistd.h>
#include <vector>

#include "doctest.h"
#include "physgen/physgen.h"

namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("physgen_capi_" + std::to_string(::getpid()) + "_" + name);
  fs::remove_all(p);
  return p;
}

pg_dataset* tiny_darcy(int count, std::uint64_t seed) {
  pg_darcy_params p;
  pg_darcy_params_default(&p);
  p.count = count;
  p.n = 6;
  p.s = 4;
  p.seed = seed;
  pg_dataset* ds = nullptr;
  REQUIRE(pg_generate_darcy(&p, &ds) == PG_OK);
  return ds;
}

pg_model* tiny_model(const pg_dataset* ds) {
  pg_train_params tp;
  pg_train_params_default(&tp);
  tp.width = 8;
  tp.hidden_layers = 2;
  tp.time_frequencies = 3;
  tp.epochs = 2;
  tp.batch_size = 8;
  tp.prior_rank = 4;
  pg_model* model = nullptr;
  double loss = -1.0;
  REQUIRE(pg_train(ds, &tp, nullptr, &model, &loss) == PG_OK);
  CHECK(loss > 0.0);
  return model;
}

}  // namespace

TEST_SUITE("capi") {
  TEST_CASE("defaults and status names") {
    pg_darcy_params d;
    pg_darcy_params_default(&d);
    CHECK(d.n == 16);
    CHECK(d.s == 16);
    CHECK(d.source_rate == 10.0);
    pg_sample_params s;
    pg_sample_params_default(&s);
    CHECK(s.equation == PG_EQUATION_PF_ODE);
    CHECK(s.tau == 2000);
    CHECK(s.eps_rule == PG_EPS_PAPER);
    pg_train_params t;
    pg_train_params_default(&t);
    CHECK(t.width == 256);
    CHECK(t.hidden_layers == 4);
    CHECK(t.batch_size == 128);
    CHECK(std::string(pg_status_name(PG_ERR_CHECKSUM)) == "checksum mismatch");
    CHECK(std::strlen(pg_version()) > 0);
  }

  TEST_CASE("argument errors set the last error") {
    pg_dataset* ds = nullptr;
    CHECK(pg_generate_darcy(nullptr, &ds) == PG_ERR_INVALID_ARGUMENT);
    CHECK(std::strlen(pg_last_error()) > 0);
    pg_darcy_params p;
    pg_darcy_params_default(&p);
    p.count = 0;
    CHECK(pg_generate_darcy(&p, &ds) == PG_ERR_INVALID_ARGUMENT);
    CHECK(ds == nullptr);
    CHECK(pg_dataset_load(scratch("none").c_str(), &ds) == PG_ERR_IO);
    pg_dataset_free(nullptr);
    pg_model_free(nullptr);
  }

  TEST_CASE("dataset handles") {
    pg_dataset* ds = tiny_darcy(3, 1);
    CHECK(pg_dataset_count(ds) == 3);
    CHECK(pg_dataset_dim(ds) == 72);
    CHECK(std::string(pg_dataset_kind(ds)) == "darcy");
    std::vector<double> x(72);
    CHECK(pg_dataset_sample(ds, 2, x.data(), x.size()) == PG_OK);
    CHECK(pg_dataset_sample(ds, 3, x.data(), x.size()) == PG_ERR_INVALID_ARGUMENT);
    CHECK(pg_dataset_sample(ds, 0, x.data(), 10) == PG_ERR_INVALID_ARGUMENT);

    const fs::path dir = scratch("ds");
    CHECK(pg_dataset_save(ds, dir.c_str()) == PG_OK);
    pg_dataset* back = nullptr;
    CHECK(pg_dataset_load(dir.c_str(), &back) == PG_OK);
    std::vector<double> y(72);
    pg_dataset_sample(back, 2, y.data(), y.size());
    CHECK(x == y);
    CHECK(pg_dataset_emit_image(ds, 0, 1, (dir / "k.pgm").c_str()) == PG_OK);
    CHECK(fs::exists(dir / "k.pgm"));
    CHECK(pg_dataset_emit_image(ds, 0, 2, (dir / "bad.pgm").c_str()) == PG_ERR_INVALID_ARGUMENT);
    pg_dataset_free(back);
    pg_dataset_free(ds);
    fs::remove_all(dir);
  }

  TEST_CASE("train, sample, impute and evaluate") {
    pg_dataset* ds = tiny_darcy(16, 2);
    pg_model* model = tiny_model(ds);
    char hash[65];
    CHECK(pg_model_base_hash(model, hash, sizeof hash) == PG_OK);
    CHECK(std::strlen(hash) == 64);

    const fs::path ck = scratch("m.ckpt");
    CHECK(pg_model_save(model, ck.c_str()) == PG_OK);
    pg_model* loaded = nullptr;
    CHECK(pg_model_load(ck.c_str(), &loaded) == PG_OK);
    char hash2[65];
    pg_model_base_hash(loaded, hash2, sizeof hash2);
    CHECK(std::string(hash) == hash2);

    pg_sample_params sp;
    pg_sample_params_default(&sp);
    sp.tau = 8;
    sp.count = 3;
    sp.N = 2;
    sp.M = 1;
    pg_dataset* out = nullptr;
    pg_counters counters{};
    CHECK(pg_sample(loaded, ds, nullptr, &sp, &out, &counters) == PG_OK);
    CHECK(pg_dataset_count(out) == 3);
    CHECK(counters.score_evals == 8);
    CHECK(counters.residual_evals == 3);

    pg_metrics m{};
    CHECK(pg_eval(out, ds, nullptr, &m) == PG_OK);
    CHECK(std::string(m.equation) == "pf_ode");
    CHECK(m.tau == 8);
    CHECK(m.has_pressure_error == 0);
    CHECK(m.mean_residual > 0.0);
    const fs::path csv = scratch("m.csv");
    CHECK(pg_metrics_append_csv(&m, "run-a", csv.c_str()) == PG_OK);
    CHECK(fs::file_size(csv) > 0);

    pg_dataset* imp = nullptr;
    sp.m = 5;
    CHECK(pg_impute(loaded, ds, ds, &sp, 0, &imp, &counters) == PG_ERR_UNSUPPORTED);
    CHECK(std::string(pg_last_error()).find("reverse SDE") != std::string::npos);
    sp.equation = PG_EQUATION_REVERSE_SDE;
    CHECK(pg_impute(loaded, ds, ds, &sp, 1, &imp, &counters) == PG_OK);
    CHECK(counters.score_evals == 16);
    std::vector<double> a(72), b(72);
    pg_dataset_sample(imp, 1, a.data(), a.size());
    pg_dataset_sample(ds, 1, b.data(), b.size());
    int equal = 0;
    for (int k = 0; k < 36; ++k) equal += a[k] == b[k];
    CHECK(equal >= 5);
    CHECK(pg_eval(imp, ds, ds, &m) == PG_OK);
    CHECK(m.has_pressure_error == 1);
    CHECK(m.m == 5);
    CHECK(m.r == 1);

    pg_dataset* pod = nullptr;
    CHECK(pg_pod(ds, ds, 4, 36, 2, 0, &pod) == PG_OK);
    CHECK(pg_dataset_count(pod) == 2);

    // conditional training needs a base and data of matching shape
    pg_train_params tp;
    pg_train_params_default(&tp);
    tp.condition = PG_CONDITION_THETA;
    pg_model* cond = nullptr;
    CHECK(pg_train(ds, &tp, nullptr, &cond, nullptr) == PG_ERR_INVALID_ARGUMENT);

    pg_dataset_free(pod);
    pg_dataset_free(imp);
    pg_dataset_free(out);
    pg_model_free(loaded);
    pg_model_free(model);
    pg_dataset_free(ds);
    fs::remove(ck);
    fs::remove(csv);
  }
}
