#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "physgen/diffusion.hpp"
#include "physgen/rng.hpp"

namespace physgen::nn {

struct Architecture {
  int dim = 0;
  int width = 256;
  int hidden_layers = 4;
  int time_frequencies = 16;

  int embedding_dim() const noexcept { return 2 * time_frequencies; }
  bool operator==(const Architecture&) const = default;
};

void validate(const Architecture& arch);

/// Sinusoidal features [sin(w_k t), cos(w_k t)] with w_k geometric in [1, 1000].
Eigen::MatrixXd time_embedding(const Eigen::VectorXd& t, int frequencies);

/// Residual MLP over a flat parameter vector:
///   h_0 = silu(W_in x + T_0 e + b_0) + inj_0
///   h_l = h_{l-1} + silu(W_l h_{l-1} + T_l e + b_l) + inj_l
class ResidualStack {
 public:
  ResidualStack() = default;
  ResidualStack(int input_dim, int width, int layers, int embedding_dim);

  std::size_t parameter_count() const noexcept { return count_; }
  int width() const noexcept { return width_; }
  int layers() const noexcept { return layers_; }

  struct Cache {
    Eigen::MatrixXd input;
    Eigen::MatrixXd embedding;
    std::vector<Eigen::MatrixXd> pre;     // a_l
    std::vector<Eigen::MatrixXd> hidden;  // h_l
  };

  void initialize(Eigen::Ref<Eigen::VectorXd> params, Rng& rng) const;

  /// `injections` is either empty or holds one width x batch matrix per layer.
  Cache forward(const double* params, const Eigen::MatrixXd& input, const Eigen::MatrixXd& embedding,
                const std::vector<Eigen::MatrixXd>& injections = {}) const;

  /// Back-propagates external gradients on each h_l (empty matrices mean zero).
  /// Accumulates parameter gradients into `grad` when non-null and the input gradient
  /// into `input_grad` when non-null. Returns the total gradient on every h_l.
  std::vector<Eigen::MatrixXd> backward(const double* params, const Cache& cache,
                                        const std::vector<Eigen::MatrixXd>& hidden_grads, double* grad,
                                        Eigen::MatrixXd* input_grad) const;

 private:
  struct Layer {
    std::size_t w, wt, b;  // offsets
    int cols;
  };
  int input_dim_ = 0, width_ = 0, layers_ = 0, embedding_dim_ = 0;
  std::vector<Layer> layout_;
  std::size_t count_ = 0;
};

/// Moments of the training data in model units. Its exact score under the forward
/// kernel is added to the network output, so the network only learns the remainder.
struct GaussianPrior {
  Eigen::VectorXd mean;
  Eigen::MatrixXd basis;    // d x r, orthonormal columns
  Eigen::VectorXd lambdas;  // r leading covariance eigenvalues
  double rest = 0.0;        // mean eigenvalue of the discarded directions

  /// sigma(t) times the score of N(mean, cov) pushed through the forward kernel.
  Eigen::MatrixXd scaled_score(const Eigen::MatrixXd& y, const Eigen::VectorXd& t,
                               const diffusion::VPSchedule& sched) const;
};

/// Sample moments of `data` (columns are samples) truncated to `max_rank` directions.
GaussianPrior fit_gaussian_prior(const Eigen::MatrixXd& data, int max_rank);

struct InitOptions {
  std::uint64_t seed = 0;
  bool zero_output = false;
};

/// Unconditional score model s(y, t) = (head(stack(y, t)) + prior term) / sigma(t).
class ScoreNetwork {
 public:
  ScoreNetwork(Architecture arch, diffusion::VPSchedule sched, InitOptions init = {});

  const Architecture& architecture() const noexcept { return arch_; }
  const diffusion::VPSchedule& schedule() const noexcept { return sched_; }
  const Eigen::VectorXd& parameters() const noexcept { return params_; }
  Eigen::VectorXd& parameters() noexcept { return params_; }

  void set_prior(GaussianPrior prior);
  const std::optional<GaussianPrior>& prior() const noexcept { return prior_; }

  Eigen::MatrixXd forward(const Eigen::MatrixXd& y, const Eigen::VectorXd& t) const;
  Eigen::VectorXd forward(const Eigen::VectorXd& y, double t) const;

  /// Raw head output sigma(t) s(y, t) with the stack cache, for training.
  struct Pass {
    ResidualStack::Cache cache;
    Eigen::MatrixXd output;
  };
  Pass forward_pass(const Eigen::MatrixXd& y, const Eigen::VectorXd& t,
                    const std::vector<Eigen::MatrixXd>& injections = {}) const;
  /// Gradient of a loss given d loss / d output. Parameter gradients go to `grad`
  /// (nullable); returns the total gradient on every hidden level.
  std::vector<Eigen::MatrixXd> backward(const Pass& pass, const Eigen::MatrixXd& output_grad, double* grad) const;

  const ResidualStack& stack() const noexcept { return stack_; }
  std::size_t head_offset() const noexcept { return stack_.parameter_count(); }

 private:
  Architecture arch_;
  diffusion::VPSchedule sched_;
  ResidualStack stack_;
  Eigen::VectorXd params_;
  std::optional<GaussianPrior> prior_;
};

/// Frozen base network plus a trainable branch whose per-layer contributions pass
/// through zero-initialized gates into the base hidden states.
class ConditionalAugmentation {
 public:
  ConditionalAugmentation(ScoreNetwork base, int condition_dim, std::uint64_t seed, int encoder_width = 0);

  const ScoreNetwork& base() const noexcept { return base_; }
  int condition_dim() const noexcept { return condition_dim_; }
  int encoder_width() const noexcept { return encoder_width_; }
  const Eigen::VectorXd& parameters() const noexcept { return params_; }
  Eigen::VectorXd& parameters() noexcept { return params_; }

  /// Columns of `cond` are per-member conditions.
  Eigen::MatrixXd forward(const Eigen::MatrixXd& y, const Eigen::VectorXd& t, const Eigen::MatrixXd& cond) const;

  struct Pass {
    Eigen::MatrixXd cond;
    Eigen::MatrixXd encoder_pre;
    Eigen::MatrixXd encoder_hidden;
    ResidualStack::Cache branch;
    ScoreNetwork::Pass base;
  };
  Pass forward_pass(const Eigen::MatrixXd& y, const Eigen::VectorXd& t, const Eigen::MatrixXd& cond) const;
  /// Accumulates branch parameter gradients for d loss / d (sigma s) = output_grad.
  void backward(const Pass& pass, const Eigen::MatrixXd& output_grad, Eigen::VectorXd& grad) const;

 private:
  struct Offsets {
    std::size_t enc1_w, enc1_b, enc2_w, enc2_b, stack, gates;
  };
  ScoreNetwork base_;
  int condition_dim_;
  int encoder_width_;
  ResidualStack branch_;
  Offsets off_{};
  Eigen::VectorXd params_;
};

/// gamma * cond + (1 - gamma) * uncond.
Eigen::MatrixXd cfg_score(const Eigen::MatrixXd& cond, const Eigen::MatrixXd& uncond, double gamma);

struct TrainConfig {
  double learning_rate = 1e-4;
  int batch_size = 128;
  int epochs = 100;
  std::uint64_t seed = 0;
  double t_min = diffusion::kDefaultTMin;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  diffusion::DsmWeighting weighting = diffusion::DsmWeighting::kernel_variance;
};

void validate(const TrainConfig& cfg);

struct TrainReport {
  std::vector<double> losses;  // one per optimizer step
};

class Adam {
 public:
  Adam(std::size_t size, double lr, double beta1, double beta2, double eps);
  void step(Eigen::Ref<Eigen::VectorXd> params, const Eigen::VectorXd& grad);

 private:
  Eigen::VectorXd m_, v_;
  double lr_, beta1_, beta2_, eps_;
  long steps_ = 0;
};

/// One training minibatch: data columns, times and noise.
struct Batch {
  Eigen::MatrixXd y0;
  Eigen::VectorXd t;
  Eigen::MatrixXd z;
  std::vector<int> members;
};

/// Loss of a network on a batch and its parameter gradient (when `grad` is non-null).
double dsm_loss_and_grad(const ScoreNetwork& net, const Batch& batch, diffusion::DsmWeighting weighting,
                         Eigen::VectorXd* grad);
double dsm_loss_and_grad(const ConditionalAugmentation& model, const Batch& batch, const Eigen::MatrixXd& cond,
                         diffusion::DsmWeighting weighting, Eigen::VectorXd* grad);

/// Draws the deterministic sequence of minibatches for `data` (columns are samples).
class BatchStream {
 public:
  BatchStream(const Eigen::MatrixXd& data, const diffusion::VPSchedule& sched, const TrainConfig& cfg);
  bool next(Batch& out);  // false once all epochs are consumed
  int epoch() const noexcept { return epoch_; }
  Rng& rng() noexcept { return rng_; }

 private:
  const Eigen::MatrixXd& data_;
  diffusion::VPSchedule sched_;
  TrainConfig cfg_;
  Rng rng_;
  std::vector<int> order_;
  std::size_t cursor_ = 0;
  int epoch_ = 0;
};

/// With a prior the output head starts at zero, so training starts from the Gaussian score.
ScoreNetwork train_unconditional(const Eigen::MatrixXd& data, const Architecture& arch,
                                 const diffusion::VPSchedule& sched, const TrainConfig& cfg,
                                 TrainReport* report = nullptr, const GaussianPrior* prior = nullptr);

/// Produces the condition columns for the given batch members.
using ConditionSource = std::function<Eigen::MatrixXd(const std::vector<int>& members, Rng& rng)>;

ConditionalAugmentation train_conditional(const Eigen::MatrixXd& data, const ConditionSource& conditions,
                                          int condition_dim, const ScoreNetwork& base, const TrainConfig& cfg,
                                          TrainReport* report = nullptr);

/// Hex SHA-256 of a parameter vector's bytes.
std::string parameter_hash(const Eigen::VectorXd& params);

}  // namespace physgen::nn
