#include "physgen/score_model.hpp"

#include <openssl/evp.h>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "physgen/error.hpp"

namespace physgen::nn {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

using ConstMap = Eigen::Map<const MatrixXd>;
using MutMap = Eigen::Map<MatrixXd>;

MatrixXd silu(const MatrixXd& a) { return (a.array() / (1.0 + (-a.array()).exp())).matrix(); }

MatrixXd silu_grad(const MatrixXd& a) {
  const Eigen::ArrayXXd s = 1.0 / (1.0 + (-a.array()).exp());
  return (s * (1.0 + a.array() * (1.0 - s))).matrix();
}

void fill_uniform(double* p, std::size_t count, double bound, Rng& rng) {
  for (std::size_t i = 0; i < count; ++i) p[i] = bound * (2.0 * rng.uniform() - 1.0);
}

VectorXd sigmas(const VectorXd& t, const diffusion::VPSchedule& sched) {
  VectorXd s(t.size());
  for (Eigen::Index b = 0; b < t.size(); ++b)
    s[b] = std::sqrt(std::max(diffusion::kernel_coeffs(t[b], sched).sigma2, 1e-300));
  return s;
}

}  // namespace

void validate(const Architecture& arch) {
  require(arch.dim >= 1, "architecture: dimension must be positive");
  require(arch.width >= 1 && arch.hidden_layers >= 1, "architecture: width and depth must be positive");
  require(arch.time_frequencies >= 1, "architecture: at least one time frequency required");
}

MatrixXd time_embedding(const VectorXd& t, int frequencies) {
  MatrixXd e(2 * frequencies, t.size());
  const double log_max = std::log(1000.0);
  for (int k = 0; k < frequencies; ++k) {
    const double w = frequencies == 1 ? 1.0 : std::exp(log_max * k / (frequencies - 1));
    for (Eigen::Index b = 0; b < t.size(); ++b) {
      e(k, b) = std::sin(w * t[b]);
      e(frequencies + k, b) = std::cos(w * t[b]);
    }
  }
  return e;
}

// ---------------------------------------------------------------------------
// ResidualStack

ResidualStack::ResidualStack(int input_dim, int width, int layers, int embedding_dim)
    : input_dim_(input_dim), width_(width), layers_(layers), embedding_dim_(embedding_dim) {
  std::size_t at = 0;
  for (int l = 0; l < layers; ++l) {
    Layer layer{};
    layer.cols = l == 0 ? input_dim : width;
    layer.w = at;
    at += static_cast<std::size_t>(width) * layer.cols;
    layer.wt = at;
    at += static_cast<std::size_t>(width) * embedding_dim;
    layer.b = at;
    at += width;
    layout_.push_back(layer);
  }
  count_ = at;
}

void ResidualStack::initialize(Eigen::Ref<VectorXd> params, Rng& rng) const {
  require(static_cast<std::size_t>(params.size()) == count_, "stack parameter block has wrong size");
  for (int l = 0; l < layers_; ++l) {
    const Layer& L = layout_[l];
    const double residual_scale = l == 0 ? 1.0 : 0.5;
    fill_uniform(params.data() + L.w, static_cast<std::size_t>(width_) * L.cols,
                 residual_scale * std::sqrt(3.0 / L.cols), rng);
    fill_uniform(params.data() + L.wt, static_cast<std::size_t>(width_) * embedding_dim_,
                 std::sqrt(3.0 / embedding_dim_), rng);
    std::fill_n(params.data() + L.b, width_, 0.0);
  }
}

ResidualStack::Cache ResidualStack::forward(const double* params, const MatrixXd& input, const MatrixXd& embedding,
                                            const std::vector<MatrixXd>& injections) const {
  require(input.rows() == input_dim_, "stack input dimension mismatch");
  require(injections.empty() || static_cast<int>(injections.size()) == layers_, "one injection per layer required");
  Cache c;
  c.input = input;
  c.embedding = embedding;
  c.pre.reserve(layers_);
  c.hidden.reserve(layers_);
  for (int l = 0; l < layers_; ++l) {
    const Layer& L = layout_[l];
    const MatrixXd& prev = l == 0 ? input : c.hidden.back();
    MatrixXd a = ConstMap(params + L.w, width_, L.cols) * prev + ConstMap(params + L.wt, width_, embedding_dim_) * embedding;
    a.colwise() += Eigen::Map<const VectorXd>(params + L.b, width_);
    MatrixXd h = l == 0 ? silu(a) : MatrixXd(prev + silu(a));
    if (!injections.empty()) h += injections[l];
    c.pre.push_back(std::move(a));
    c.hidden.push_back(std::move(h));
  }
  return c;
}

std::vector<MatrixXd> ResidualStack::backward(const double* params, const Cache& cache,
                                              const std::vector<MatrixXd>& hidden_grads, double* grad,
                                              MatrixXd* input_grad) const {
  const Eigen::Index batch = cache.input.cols();
  auto external = [&](int l) -> const MatrixXd* {
    if (hidden_grads.empty() || hidden_grads[l].size() == 0) return nullptr;
    return &hidden_grads[l];
  };
  std::vector<MatrixXd> totals(layers_);
  MatrixXd gh = MatrixXd::Zero(width_, batch);
  if (const MatrixXd* g = external(layers_ - 1)) gh += *g;
  for (int l = layers_ - 1; l >= 0; --l) {
    totals[l] = gh;
    const Layer& L = layout_[l];
    const MatrixXd ga = gh.cwiseProduct(silu_grad(cache.pre[l]));
    const MatrixXd& prev = l == 0 ? cache.input : cache.hidden[l - 1];
    if (grad) {
      MutMap(grad + L.w, width_, L.cols).noalias() += ga * prev.transpose();
      MutMap(grad + L.wt, width_, embedding_dim_).noalias() += ga * cache.embedding.transpose();
      Eigen::Map<VectorXd>(grad + L.b, width_) += ga.rowwise().sum();
    }
    if (l > 0) {
      gh.noalias() += ConstMap(params + L.w, width_, L.cols).transpose() * ga;
      if (const MatrixXd* g = external(l - 1)) gh += *g;
    } else if (input_grad) {
      *input_grad = ConstMap(params + L.w, width_, L.cols).transpose() * ga;
    }
  }
  return totals;
}

// ---------------------------------------------------------------------------
// GaussianPrior

MatrixXd GaussianPrior::scaled_score(const MatrixXd& y, const VectorXd& t, const diffusion::VPSchedule& sched) const {
  require(y.rows() == mean.size() && t.size() == y.cols(), "gaussian prior: dimension mismatch");
  MatrixXd c(y.rows(), y.cols());
  VectorXd alpha(t.size()), sigma(t.size());
  for (Eigen::Index b = 0; b < t.size(); ++b) {
    const auto k = diffusion::kernel_coeffs(t[b], sched);
    alpha[b] = k.alpha;
    sigma[b] = std::sqrt(std::max(k.sigma2, 1e-300));
    c.col(b) = y.col(b) - k.alpha * mean;
  }
  MatrixXd proj = basis.transpose() * c;
  MatrixXd out = c - basis * proj;
  for (Eigen::Index b = 0; b < t.size(); ++b) {
    const double a2 = alpha[b] * alpha[b], s2 = sigma[b] * sigma[b];
    out.col(b) /= a2 * rest + s2;
    proj.col(b).array() /= a2 * lambdas.array() + s2;
  }
  out.noalias() += basis * proj;
  for (Eigen::Index b = 0; b < t.size(); ++b) out.col(b) *= -sigma[b];
  return out;
}

GaussianPrior fit_gaussian_prior(const MatrixXd& data, int max_rank) {
  require(data.cols() >= 2, "gaussian prior: at least two samples required");
  require(max_rank >= 1, "gaussian prior: rank must be positive");
  GaussianPrior p;
  p.mean = data.rowwise().mean();
  const MatrixXd centered = data.colwise() - p.mean;
  const MatrixXd cov = centered * centered.transpose() / static_cast<double>(data.cols() - 1);
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) fail(ErrorCode::solver, "gaussian prior: eigendecomposition failed");
  const Eigen::Index d = cov.rows(), r = std::min<Eigen::Index>(max_rank, d);
  p.basis = eig.eigenvectors().rightCols(r).rowwise().reverse();
  p.lambdas = eig.eigenvalues().tail(r).reverse().cwiseMax(0.0);
  p.rest = r < d ? std::max(0.0, eig.eigenvalues().head(d - r).mean()) : 0.0;
  return p;
}

// ---------------------------------------------------------------------------
// ScoreNetwork

ScoreNetwork::ScoreNetwork(Architecture arch, diffusion::VPSchedule sched, InitOptions init)
    : arch_(arch), sched_(sched) {
  validate(arch_);
  diffusion::validate(sched_);
  stack_ = ResidualStack(arch_.dim, arch_.width, arch_.hidden_layers, arch_.embedding_dim());
  const std::size_t head = static_cast<std::size_t>(arch_.dim) * arch_.width + arch_.dim;
  params_ = VectorXd::Zero(static_cast<Eigen::Index>(stack_.parameter_count() + head));
  Rng rng(init.seed);
  stack_.initialize(params_.head(static_cast<Eigen::Index>(stack_.parameter_count())), rng);
  if (!init.zero_output)
    fill_uniform(params_.data() + head_offset(), static_cast<std::size_t>(arch_.dim) * arch_.width,
                 std::sqrt(3.0 / arch_.width), rng);
}

ScoreNetwork::Pass ScoreNetwork::forward_pass(const MatrixXd& y, const VectorXd& t,
                                              const std::vector<MatrixXd>& injections) const {
  if (y.rows() != arch_.dim || t.size() != y.cols()) {
    std::ostringstream msg;
    msg << "score network: expected " << arch_.dim << "-dimensional input with one time per column, got " << y.rows()
        << "x" << y.cols() << " with " << t.size() << " times";
    fail(ErrorCode::invalid_argument, msg.str());
  }
  Pass pass;
  pass.cache = stack_.forward(params_.data(), y, time_embedding(t, arch_.time_frequencies), injections);
  const double* head = params_.data() + head_offset();
  pass.output = ConstMap(head, arch_.dim, arch_.width) * pass.cache.hidden.back();
  pass.output.colwise() += Eigen::Map<const VectorXd>(head + static_cast<std::size_t>(arch_.dim) * arch_.width, arch_.dim);
  if (prior_) pass.output += prior_->scaled_score(y, t, sched_);
  return pass;
}

void ScoreNetwork::set_prior(GaussianPrior prior) {
  const Eigen::Index r = prior.basis.cols();
  require(prior.mean.size() == arch_.dim && prior.basis.rows() == arch_.dim && prior.lambdas.size() == r,
          "gaussian prior: shape does not match the architecture");
  require(prior.mean.allFinite() && prior.basis.allFinite() && prior.lambdas.allFinite() && std::isfinite(prior.rest),
          "gaussian prior: values must be finite");
  require(prior.lambdas.minCoeff() >= 0.0 && prior.rest >= 0.0, "gaussian prior: eigenvalues must be nonnegative");
  prior_ = std::move(prior);
}

std::vector<MatrixXd> ScoreNetwork::backward(const Pass& pass, const MatrixXd& output_grad, double* grad) const {
  const double* head = params_.data() + head_offset();
  if (grad) {
    double* ghead = grad + head_offset();
    MutMap(ghead, arch_.dim, arch_.width).noalias() += output_grad * pass.cache.hidden.back().transpose();
    Eigen::Map<VectorXd>(ghead + static_cast<std::size_t>(arch_.dim) * arch_.width, arch_.dim) +=
        output_grad.rowwise().sum();
  }
  std::vector<MatrixXd> hidden_grads(arch_.hidden_layers);
  hidden_grads.back() = ConstMap(head, arch_.dim, arch_.width).transpose() * output_grad;
  return stack_.backward(params_.data(), pass.cache, hidden_grads, grad, nullptr);
}

MatrixXd ScoreNetwork::forward(const MatrixXd& y, const VectorXd& t) const {
  MatrixXd out = forward_pass(y, t).output;
  const VectorXd s = sigmas(t, sched_);
  for (Eigen::Index b = 0; b < out.cols(); ++b) out.col(b) /= s[b];
  return out;
}

VectorXd ScoreNetwork::forward(const VectorXd& y, double t) const {
  return forward(MatrixXd(y), VectorXd::Constant(1, t)).col(0);
}

// ---------------------------------------------------------------------------
// ConditionalAugmentation

ConditionalAugmentation::ConditionalAugmentation(ScoreNetwork base, int condition_dim, std::uint64_t seed,
                                                 int encoder_width)
    : base_(std::move(base)), condition_dim_(condition_dim) {
  require(condition_dim_ >= 1, "conditional augmentation: condition dimension must be positive");
  const Architecture& a = base_.architecture();
  encoder_width_ = encoder_width > 0 ? encoder_width : a.width;
  branch_ = ResidualStack(a.dim, a.width, a.hidden_layers, a.embedding_dim());

  std::size_t at = 0;
  off_.enc1_w = at, at += static_cast<std::size_t>(encoder_width_) * condition_dim_;
  off_.enc1_b = at, at += encoder_width_;
  off_.enc2_w = at, at += static_cast<std::size_t>(a.dim) * encoder_width_;
  off_.enc2_b = at, at += a.dim;
  off_.stack = at, at += branch_.parameter_count();
  off_.gates = at, at += static_cast<std::size_t>(a.hidden_layers) * (static_cast<std::size_t>(a.width) * a.width + a.width);
  params_ = VectorXd::Zero(static_cast<Eigen::Index>(at));

  Rng rng(seed);
  fill_uniform(params_.data() + off_.enc1_w, static_cast<std::size_t>(encoder_width_) * condition_dim_,
               std::sqrt(3.0 / condition_dim_), rng);
  fill_uniform(params_.data() + off_.enc2_w, static_cast<std::size_t>(a.dim) * encoder_width_,
               std::sqrt(3.0 / encoder_width_), rng);
  // trainable copy of the frozen stack; gates stay zero
  params_.segment(static_cast<Eigen::Index>(off_.stack), static_cast<Eigen::Index>(branch_.parameter_count())) =
      base_.parameters().head(static_cast<Eigen::Index>(base_.stack().parameter_count()));
}

ConditionalAugmentation::Pass ConditionalAugmentation::forward_pass(const MatrixXd& y, const VectorXd& t,
                                                                    const MatrixXd& cond) const {
  const Architecture& a = base_.architecture();
  if (cond.rows() != condition_dim_ || cond.cols() != y.cols()) {
    std::ostringstream msg;
    msg << "conditional model: expected " << condition_dim_ << "-dimensional conditions for " << y.cols()
        << " inputs, got " << cond.rows() << "x" << cond.cols();
    fail(ErrorCode::invalid_argument, msg.str());
  }
  const double* p = params_.data();
  Pass pass;
  pass.cond = cond;
  pass.encoder_pre = ConstMap(p + off_.enc1_w, encoder_width_, condition_dim_) * cond;
  pass.encoder_pre.colwise() += Eigen::Map<const VectorXd>(p + off_.enc1_b, encoder_width_);
  pass.encoder_hidden = silu(pass.encoder_pre);
  MatrixXd branch_in = y + ConstMap(p + off_.enc2_w, a.dim, encoder_width_) * pass.encoder_hidden;
  branch_in.colwise() += Eigen::Map<const VectorXd>(p + off_.enc2_b, a.dim);

  pass.branch = branch_.forward(p + off_.stack, branch_in, time_embedding(t, a.time_frequencies));
  std::vector<MatrixXd> injections(a.hidden_layers);
  const std::size_t gate_stride = static_cast<std::size_t>(a.width) * a.width + a.width;
  for (int l = 0; l < a.hidden_layers; ++l) {
    const double* g = p + off_.gates + l * gate_stride;
    injections[l] = ConstMap(g, a.width, a.width) * pass.branch.hidden[l];
    injections[l].colwise() += Eigen::Map<const VectorXd>(g + static_cast<std::size_t>(a.width) * a.width, a.width);
  }
  pass.base = base_.forward_pass(y, t, injections);
  return pass;
}

MatrixXd ConditionalAugmentation::forward(const MatrixXd& y, const VectorXd& t, const MatrixXd& cond) const {
  MatrixXd out = forward_pass(y, t, cond).base.output;
  const VectorXd s = sigmas(t, base_.schedule());
  for (Eigen::Index b = 0; b < out.cols(); ++b) out.col(b) /= s[b];
  return out;
}

void ConditionalAugmentation::backward(const Pass& pass, const MatrixXd& output_grad, VectorXd& grad) const {
  require(grad.size() == params_.size(), "conditional backward: gradient size mismatch");
  const Architecture& a = base_.architecture();
  const double* p = params_.data();
  double* g = grad.data();
  const std::vector<MatrixXd> totals = base_.backward(pass.base, output_grad, nullptr);

  const std::size_t gate_stride = static_cast<std::size_t>(a.width) * a.width + a.width;
  std::vector<MatrixXd> branch_grads(a.hidden_layers);
  for (int l = 0; l < a.hidden_layers; ++l) {
    const std::size_t off = off_.gates + l * gate_stride;
    MutMap(g + off, a.width, a.width).noalias() += totals[l] * pass.branch.hidden[l].transpose();
    Eigen::Map<VectorXd>(g + off + static_cast<std::size_t>(a.width) * a.width, a.width) += totals[l].rowwise().sum();
    branch_grads[l] = ConstMap(p + off, a.width, a.width).transpose() * totals[l];
  }
  MatrixXd input_grad;
  branch_.backward(p + off_.stack, pass.branch, branch_grads, g + off_.stack, &input_grad);

  MutMap(g + off_.enc2_w, a.dim, encoder_width_).noalias() += input_grad * pass.encoder_hidden.transpose();
  Eigen::Map<VectorXd>(g + off_.enc2_b, a.dim) += input_grad.rowwise().sum();
  const MatrixXd dh = ConstMap(p + off_.enc2_w, a.dim, encoder_width_).transpose() * input_grad;
  const MatrixXd dpre = dh.cwiseProduct(silu_grad(pass.encoder_pre));
  MutMap(g + off_.enc1_w, encoder_width_, condition_dim_).noalias() += dpre * pass.cond.transpose();
  Eigen::Map<VectorXd>(g + off_.enc1_b, encoder_width_) += dpre.rowwise().sum();
}

MatrixXd cfg_score(const MatrixXd& cond, const MatrixXd& uncond, double gamma) {
  require(cond.rows() == uncond.rows() && cond.cols() == uncond.cols(), "cfg_score: dimension mismatch");
  if (gamma == 1.0) return cond;
  if (gamma == 0.0) return uncond;
  return gamma * cond + (1.0 - gamma) * uncond;
}

// ---------------------------------------------------------------------------
// Training

void validate(const TrainConfig& cfg) {
  require(cfg.learning_rate > 0.0 && cfg.batch_size >= 1 && cfg.epochs >= 1, "train config: positive lr, batch, epochs");
  require(cfg.t_min > 0.0, "train config: t_min must be positive");
  require(cfg.beta1 >= 0.0 && cfg.beta1 < 1.0 && cfg.beta2 >= 0.0 && cfg.beta2 < 1.0 && cfg.adam_eps > 0.0,
          "train config: invalid moment coefficients");
}

Adam::Adam(std::size_t size, double lr, double beta1, double beta2, double eps)
    : m_(VectorXd::Zero(static_cast<Eigen::Index>(size))),
      v_(VectorXd::Zero(static_cast<Eigen::Index>(size))),
      lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

void Adam::step(Eigen::Ref<VectorXd> params, const VectorXd& grad) {
  ++steps_;
  m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
  v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(steps_));
  params.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
}

namespace {

struct Perturbed {
  MatrixXd yt;
  VectorXd sigma;
};

Perturbed perturb_batch(const Batch& batch, const diffusion::VPSchedule& sched) {
  Perturbed p{MatrixXd(batch.y0.rows(), batch.y0.cols()), VectorXd(batch.t.size())};
  for (Eigen::Index b = 0; b < batch.t.size(); ++b) {
    const auto k = diffusion::kernel_coeffs(batch.t[b], sched);
    p.sigma[b] = std::sqrt(k.sigma2);
    p.yt.col(b) = k.alpha * batch.y0.col(b) + p.sigma[b] * batch.z.col(b);
  }
  return p;
}

// loss = mean_b w_b ||out_b + z_b||^2, where out = sigma * score
double weighted_loss(const MatrixXd& out, const Batch& batch, const VectorXd& sigma,
                     diffusion::DsmWeighting weighting, MatrixXd* out_grad) {
  const double inv_b = 1.0 / static_cast<double>(out.cols());
  double total = 0.0;
  if (out_grad) out_grad->resize(out.rows(), out.cols());
  for (Eigen::Index b = 0; b < out.cols(); ++b) {
    const double w = weighting == diffusion::DsmWeighting::unit ? 1.0 / (sigma[b] * sigma[b]) : 1.0;
    const VectorXd diff = out.col(b) + batch.z.col(b);
    total += w * diff.squaredNorm();
    if (out_grad) out_grad->col(b) = 2.0 * w * inv_b * diff;
  }
  return total * inv_b;
}

}  // namespace

double dsm_loss_and_grad(const ScoreNetwork& net, const Batch& batch, diffusion::DsmWeighting weighting, VectorXd* grad) {
  const Perturbed p = perturb_batch(batch, net.schedule());
  const ScoreNetwork::Pass pass = net.forward_pass(p.yt, batch.t);
  MatrixXd og;
  const double loss = weighted_loss(pass.output, batch, p.sigma, weighting, grad ? &og : nullptr);
  if (grad) {
    grad->setZero(net.parameters().size());
    net.backward(pass, og, grad->data());
  }
  return loss;
}

double dsm_loss_and_grad(const ConditionalAugmentation& model, const Batch& batch, const MatrixXd& cond,
                         diffusion::DsmWeighting weighting, VectorXd* grad) {
  const Perturbed p = perturb_batch(batch, model.base().schedule());
  const ConditionalAugmentation::Pass pass = model.forward_pass(p.yt, batch.t, cond);
  MatrixXd og;
  const double loss = weighted_loss(pass.base.output, batch, p.sigma, weighting, grad ? &og : nullptr);
  if (grad) {
    grad->setZero(model.parameters().size());
    model.backward(pass, og, *grad);
  }
  return loss;
}

BatchStream::BatchStream(const MatrixXd& data, const diffusion::VPSchedule& sched, const TrainConfig& cfg)
    : data_(data), sched_(sched), cfg_(cfg), rng_(cfg.seed ^ 0x5deece66dULL), order_(static_cast<std::size_t>(data.cols())) {
  require(data.cols() >= 1, "training data is empty");
  std::iota(order_.begin(), order_.end(), 0);
  std::shuffle(order_.begin(), order_.end(), rng_.engine());
}

bool BatchStream::next(Batch& out) {
  if (cursor_ >= order_.size()) {
    ++epoch_;
    if (epoch_ >= cfg_.epochs) return false;
    cursor_ = 0;
    std::shuffle(order_.begin(), order_.end(), rng_.engine());
  }
  const std::size_t end = std::min(order_.size(), cursor_ + static_cast<std::size_t>(cfg_.batch_size));
  const auto b = static_cast<Eigen::Index>(end - cursor_);
  out.members.assign(order_.begin() + static_cast<std::ptrdiff_t>(cursor_), order_.begin() + static_cast<std::ptrdiff_t>(end));
  out.y0.resize(data_.rows(), b);
  out.t.resize(b);
  out.z.resize(data_.rows(), b);
  for (Eigen::Index k = 0; k < b; ++k) {
    out.y0.col(k) = data_.col(out.members[k]);
    out.t[k] = cfg_.t_min + (sched_.T - cfg_.t_min) * rng_.uniform();
    for (Eigen::Index r = 0; r < data_.rows(); ++r) out.z(r, k) = rng_.normal();
  }
  cursor_ = end;
  return true;
}

namespace {

void check_loss(double loss, int epoch) {
  if (!std::isfinite(loss)) {
    std::ostringstream msg;
    msg << "training diverged (non-finite loss) in epoch " << epoch;
    fail(ErrorCode::diverged, msg.str());
  }
}

}  // namespace

ScoreNetwork train_unconditional(const MatrixXd& data, const Architecture& arch, const diffusion::VPSchedule& sched,
                                 const TrainConfig& cfg, TrainReport* report, const GaussianPrior* prior) {
  validate(cfg);
  require(data.rows() == arch.dim, "training data dimension does not match architecture");
  ScoreNetwork net(arch, sched, InitOptions{cfg.seed, prior != nullptr});
  if (prior) net.set_prior(*prior);
  Adam adam(static_cast<std::size_t>(net.parameters().size()), cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.adam_eps);
  BatchStream stream(data, sched, cfg);
  Batch batch;
  VectorXd grad;
  while (stream.next(batch)) {
    const double loss = dsm_loss_and_grad(net, batch, cfg.weighting, &grad);
    check_loss(loss, stream.epoch());
    if (report) report->losses.push_back(loss);
    adam.step(net.parameters(), grad);
  }
  return net;
}

ConditionalAugmentation train_conditional(const MatrixXd& data, const ConditionSource& conditions, int condition_dim,
                                          const ScoreNetwork& base, const TrainConfig& cfg, TrainReport* report) {
  validate(cfg);
  require(data.rows() == base.architecture().dim, "training data dimension does not match base architecture");
  ConditionalAugmentation model(base, condition_dim, stream_seed(cfg.seed, 1));
  Adam adam(static_cast<std::size_t>(model.parameters().size()), cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.adam_eps);
  BatchStream stream(data, base.schedule(), cfg);
  Batch batch;
  VectorXd grad;
  while (stream.next(batch)) {
    const MatrixXd cond = conditions(batch.members, stream.rng());
    const double loss = dsm_loss_and_grad(model, batch, cond, cfg.weighting, &grad);
    check_loss(loss, stream.epoch());
    if (report) report->losses.push_back(loss);
    adam.step(model.parameters(), grad);
  }
  return model;
}

std::string parameter_hash(const VectorXd& params) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(params.data(), static_cast<std::size_t>(params.size()) * sizeof(double), digest, &len, EVP_sha256(), nullptr);
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

}  // namespace physgen::nn
