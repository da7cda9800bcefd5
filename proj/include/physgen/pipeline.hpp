#pragma once

#include <cstdint>
#include <string>

#include "physgen/inverse.hpp"
#include "physgen/io/checkpoint.hpp"
#include "physgen/io/dataset.hpp"
#include "physgen/io/metrics.hpp"
#include "physgen/io/problem.hpp"
#include "physgen/score_model.hpp"

namespace physgen::pipeline {

enum class Condition { none, theta, measurements };

std::string to_string(Condition c);
Condition parse_condition(const std::string& name);

struct TrainOptions {
  nn::Architecture arch;  // dim is taken from the dataset
  nn::TrainConfig train;
  diffusion::VPSchedule schedule;
  Condition condition = Condition::none;
  /// Directions kept in the Gaussian-moment prior; 0 trains the bare network.
  int prior_rank = 128;
};

/// Unconditional training, or conditional training of an augmentation over `base`.
io::Model train_model(const io::Dataset& ds, const TrainOptions& opts, const io::Model* base = nullptr,
                      nn::TrainReport* report = nullptr);

/// Model-unit condition vector [mask; mask * pressure] for measurement conditioning.
Eigen::VectorXd measurement_condition(const io::Problem& problem, const Eigen::VectorXd& state,
                                      const std::vector<int>& indices);

struct SampleOptions {
  sampling::SamplerConfig sampler;
  int count = 1;
  double gamma = 1.0;
  const io::Dataset* conditions = nullptr;  // targets for conditional models; chain k uses column k
  int m = 0;                                 // measured nodes for measurement conditioning
  std::uint64_t measurement_seed = 0;
};

struct SampleOutput {
  io::Dataset samples;
  sampling::Counters counters;
  double wall_time = 0.0;
};

/// Score function of a model on the given problem, with per-chain conditions when the
/// model is conditional.
sampling::ScoreFn make_score(const io::Model& model, const SampleOptions& opts, const io::Problem& problem);

SampleOutput run_sample(const io::Model& model, const io::Dataset& reference, const SampleOptions& opts);

struct ImputeOptions {
  sampling::SamplerConfig sampler;
  int cases = 1;
  int m = 0;
  int repaint_r = 0;
  std::uint64_t measurement_seed = 0;
};

/// Reconstructs the first `cases` targets from m pressure measurements each.
SampleOutput run_impute(const io::Model& model, const io::Dataset& reference, const io::Dataset& targets,
                        const ImputeOptions& opts);

/// POD gappy reconstruction of the first `cases` targets with a rank-k basis of `reference`.
io::Dataset run_pod(const io::Dataset& reference, const io::Dataset& targets, int rank, int m, int cases,
                    std::uint64_t measurement_seed);

/// Metrics of `samples` against the reference dataset's own residual baseline.
io::MetricsRow run_eval(const io::Dataset& samples, const io::Dataset& reference, const io::Dataset* targets);

}  // namespace physgen::pipeline
