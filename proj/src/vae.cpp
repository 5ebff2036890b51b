// Copyright 2026 The fvq Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "fvq/vae.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "fvq/preprocess.hpp"

namespace fvq {

namespace {

const double kLog2Pi = std::log(2.0 * std::numbers::pi);

Eigen::VectorXd relu(const Eigen::VectorXd& v) { return v.cwiseMax(0.0); }

// Indicator of strictly positive pre-activations (ReLU subgradient at 0 is 0).
Eigen::VectorXd positive_mask(const Eigen::VectorXd& v) {
  return (v.array() > 0.0).cast<double>().matrix();
}

void fill_uniform(RowMatrixd& w, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = bound * (2.0 * rng.uniform() - 1.0);
}

std::span<double> view(RowMatrixd& m) { return {m.data(), static_cast<std::size_t>(m.size())}; }
std::span<double> view(Eigen::VectorXd& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

}  // namespace

void VaeConfig::validate() const {
  if (dim == 0 || hidden_width() == 0 || latent_dim == 0 || num_classes == 0)
    throw std::invalid_argument("VAE dimensions must be >= 1");
  if (!(lambda1 >= 0.0 && lambda2 >= 0.0 && lambda3 >= 0.0))
    throw std::invalid_argument("loss weights must be nonnegative");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
    throw std::invalid_argument("dropout rate must be in [0, 1)");
  if (batch_size == 0) throw std::invalid_argument("batch size must be >= 1");
}

void to_json(nlohmann::json& j, const VaeConfig& cfg) {
  j = nlohmann::json{{"dim", cfg.dim},
                     {"hidden", cfg.hidden_width()},
                     {"latent_dim", cfg.latent_dim},
                     {"num_classes", cfg.num_classes},
                     {"lambda1", cfg.lambda1},
                     {"lambda2", cfg.lambda2},
                     {"lambda3", cfg.lambda3},
                     {"dropout_rate", cfg.dropout_rate},
                     {"batch_size", cfg.batch_size},
                     {"max_batches", cfg.max_batches},
                     {"seed", cfg.seed}};
}

void from_json(const nlohmann::json& j, VaeConfig& cfg) {
  const VaeConfig defaults;
  cfg.dim = j.value("dim", defaults.dim);
  cfg.hidden = j.value("hidden", defaults.hidden);
  cfg.latent_dim = j.value("latent_dim", defaults.latent_dim);
  cfg.num_classes = j.value("num_classes", defaults.num_classes);
  cfg.lambda1 = j.value("lambda1", defaults.lambda1);
  cfg.lambda2 = j.value("lambda2", defaults.lambda2);
  cfg.lambda3 = j.value("lambda3", defaults.lambda3);
  cfg.dropout_rate = j.value("dropout_rate", defaults.dropout_rate);
  cfg.batch_size = j.value("batch_size", defaults.batch_size);
  cfg.max_batches = j.value("max_batches", defaults.max_batches);
  cfg.seed = j.value("seed", defaults.seed);
}

const std::array<std::string_view, VaeParams::kTensorCount>& VaeParams::tensor_names() {
  static const std::array<std::string_view, kTensorCount> names{
      "enc_w1", "enc_b1", "enc_w2", "enc_b2", "dec_w",
      "dec_b",  "cls_w",  "cls_b",  "log_var_x", "log_var_z"};
  return names;
}

VaeParams VaeParams::zeros(std::size_t dim, std::size_t hidden, std::size_t latent,
                           std::size_t classes) {
  const auto d = static_cast<Eigen::Index>(dim), h = static_cast<Eigen::Index>(hidden),
             l = static_cast<Eigen::Index>(latent), k = static_cast<Eigen::Index>(classes);
  VaeParams p;
  p.enc_w1 = RowMatrixd::Zero(d, h);
  p.enc_b1 = Eigen::VectorXd::Zero(h);
  p.enc_w2 = RowMatrixd::Zero(h, l);
  p.enc_b2 = Eigen::VectorXd::Zero(l);
  p.dec_w = RowMatrixd::Zero(l, d);
  p.dec_b = Eigen::VectorXd::Zero(d);
  p.cls_w = RowMatrixd::Zero(l, k);
  p.cls_b = Eigen::VectorXd::Zero(k);
  p.log_var_x = 0.0;
  p.log_var_z = Eigen::VectorXd::Zero(l);
  return p;
}

VaeParams VaeParams::initialize(const VaeConfig& cfg, Rng& rng) {
  cfg.validate();
  VaeParams p = zeros(cfg.dim, cfg.hidden_width(), cfg.latent_dim, cfg.num_classes);
  fill_uniform(p.enc_w1, rng);
  fill_uniform(p.enc_w2, rng);
  fill_uniform(p.dec_w, rng);
  fill_uniform(p.cls_w, rng);
  return p;
}

std::array<std::span<double>, VaeParams::kTensorCount> VaeParams::tensors() {
  return {view(enc_w1), view(enc_b1), view(enc_w2), view(enc_b2),
          view(dec_w),  view(dec_b),  view(cls_w),  view(cls_b),
          std::span<double>(&log_var_x, 1), view(log_var_z)};
}

std::array<std::span<const double>, VaeParams::kTensorCount> VaeParams::tensors() const {
  auto mutable_views = const_cast<VaeParams*>(this)->tensors();
  std::array<std::span<const double>, kTensorCount> out;
  for (std::size_t i = 0; i < kTensorCount; ++i) out[i] = mutable_views[i];
  return out;
}

bool VaeParams::same_shape(const VaeParams& other) const {
  const auto a = tensors();
  const auto b = other.tensors();
  for (std::size_t i = 0; i < kTensorCount; ++i)
    if (a[i].size() != b[i].size()) return false;
  return dim() == other.dim() && hidden() == other.hidden() &&
         latent_dim() == other.latent_dim() && num_classes() == other.num_classes();
}

bool VaeParams::allFinite() const {
  for (auto t : tensors())
    for (double v : t)
      if (!std::isfinite(v)) return false;
  return true;
}

Eigen::VectorXd encoder_forward(const VaeParams& params, const Eigen::VectorXd& x) {
  const Eigen::VectorXd hidden = relu(params.enc_w1.transpose() * x + params.enc_b1);
  return params.enc_w2.transpose() * hidden + params.enc_b2;
}

Eigen::VectorXd sample_latent(const Eigen::VectorXd& mu_z, const Eigen::VectorXd& log_var_z,
                              Rng& rng) {
  Eigen::VectorXd z(mu_z.size());
  for (Eigen::Index k = 0; k < mu_z.size(); ++k)
    z[k] = mu_z[k] + rng.normal() * std::exp(0.5 * log_var_z[k]);
  return z;
}

Eigen::VectorXd decoder_forward(const VaeParams& params, const Eigen::VectorXd& z) {
  return relu(params.dec_w.transpose() * z + params.dec_b);
}

double reconstruction_loss(const Eigen::VectorXd& x, const Eigen::VectorXd& mu_x,
                           double log_var_x) {
  const double d = static_cast<double>(x.size());
  return 0.5 * (x - mu_x).squaredNorm() * std::exp(-log_var_x) + 0.5 * d * (log_var_x + kLog2Pi);
}

double regularization_loss(const Eigen::VectorXd& mu_z, const Eigen::VectorXd& log_var_z) {
  double kl = 0.0;
  for (Eigen::Index k = 0; k < mu_z.size(); ++k)
    kl += mu_z[k] * mu_z[k] + std::exp(log_var_z[k]) - 1.0 - log_var_z[k];
  return 0.5 * kl;
}

namespace {

// log-softmax cross-entropy plus the softmax probabilities.
double softmax_cross_entropy(const Eigen::VectorXd& logits, std::size_t label,
                             Eigen::VectorXd* probs) {
  Eigen::Index top = 0;
  const double peak = logits.maxCoeff(&top);
  double rest = 0.0;
  for (Eigen::Index i = 0; i < logits.size(); ++i)
    if (i != top) rest += std::exp(logits[i] - peak);
  const double log_norm = peak + std::log1p(rest);
  if (probs) *probs = (logits.array() - log_norm).exp().matrix();
  return log_norm - logits[static_cast<Eigen::Index>(label)];
}

}  // namespace

double classification_loss(const VaeParams& params, const Eigen::VectorXd& z, std::size_t label) {
  if (label >= params.num_classes()) throw std::invalid_argument("label >= num_classes");
  const Eigen::VectorXd logits = params.cls_w.transpose() * z + params.cls_b;
  return softmax_cross_entropy(logits, label, nullptr);
}

SampleNoise draw_noise(const VaeConfig& cfg, Rng& rng) {
  SampleNoise noise;
  noise.mask = dropout_mask(cfg.dim, cfg.dropout_rate, rng);
  noise.eps.resize(static_cast<Eigen::Index>(cfg.latent_dim));
  for (Eigen::Index k = 0; k < noise.eps.size(); ++k) noise.eps[k] = rng.normal();
  return noise;
}

LossAndGrads loss_and_grads(const VaeParams& params, const Eigen::VectorXd& x, std::size_t label,
                            const VaeConfig& cfg, const SampleNoise& noise) {
  if (static_cast<std::size_t>(x.size()) != params.dim())
    throw std::invalid_argument("descriptor dimension does not match the model");
  if (label >= params.num_classes()) throw std::invalid_argument("label >= num_classes");

  // Forward.
  const Eigen::VectorXd input = x.cwiseProduct(noise.mask);
  const Eigen::VectorXd hidden_pre = params.enc_w1.transpose() * input + params.enc_b1;
  const Eigen::VectorXd hidden = relu(hidden_pre);
  const Eigen::VectorXd mu_z = params.enc_w2.transpose() * hidden + params.enc_b2;
  const Eigen::VectorXd sigma_z = (0.5 * params.log_var_z.array()).exp().matrix();
  const Eigen::VectorXd z = mu_z + noise.eps.cwiseProduct(sigma_z);
  const Eigen::VectorXd out_pre = params.dec_w.transpose() * z + params.dec_b;
  const Eigen::VectorXd mu_x = relu(out_pre);
  const Eigen::VectorXd logits = params.cls_w.transpose() * z + params.cls_b;

  LossAndGrads result;
  LossBreakdown& loss = result.loss;
  loss.rec = reconstruction_loss(x, mu_x, params.log_var_x);
  loss.reg = regularization_loss(mu_z, params.log_var_z);
  Eigen::VectorXd probs;
  loss.cls = softmax_cross_entropy(logits, label, &probs);
  loss.total = cfg.lambda1 * loss.rec + cfg.lambda2 * loss.reg + cfg.lambda3 * loss.cls;
  loss.lower_bound = -(loss.rec + loss.reg);

  // Backward.
  VaeParams& g = result.grads;
  g = VaeParams::zeros(params.dim(), params.hidden(), params.latent_dim(), params.num_classes());

  const double inv_var_x = std::exp(-params.log_var_x);
  const Eigen::VectorXd residual = mu_x - x;
  const Eigen::VectorXd g_out_pre =
      cfg.lambda1 * inv_var_x * residual.cwiseProduct(positive_mask(out_pre));
  g.log_var_x = cfg.lambda1 * (0.5 * static_cast<double>(x.size()) -
                               0.5 * residual.squaredNorm() * inv_var_x);

  Eigen::VectorXd g_logits = probs;
  g_logits[static_cast<Eigen::Index>(label)] -= 1.0;
  g_logits *= cfg.lambda3;

  g.dec_w = z * g_out_pre.transpose();
  g.dec_b = g_out_pre;
  g.cls_w = z * g_logits.transpose();
  g.cls_b = g_logits;

  const Eigen::VectorXd g_z = params.dec_w * g_out_pre + params.cls_w * g_logits;
  const Eigen::VectorXd g_mu_z = g_z + cfg.lambda2 * mu_z;
  g.log_var_z = (0.5 * g_z.cwiseProduct(noise.eps).cwiseProduct(sigma_z).array() +
                 0.5 * cfg.lambda2 * (params.log_var_z.array().exp() - 1.0))
                    .matrix();

  g.enc_w2 = hidden * g_mu_z.transpose();
  g.enc_b2 = g_mu_z;
  const Eigen::VectorXd g_hidden_pre =
      (params.enc_w2 * g_mu_z).cwiseProduct(positive_mask(hidden_pre));
  g.enc_w1 = input * g_hidden_pre.transpose();
  g.enc_b1 = g_hidden_pre;
  return result;
}

LossAndGrads fused_loss_and_grads(const VaeParams& params, const Eigen::VectorXd& x,
                                  std::size_t label, const VaeConfig& cfg, Rng& rng) {
  return loss_and_grads(params, x, label, cfg, draw_noise(cfg, rng));
}

AdaDeltaState AdaDeltaState::fresh(const VaeParams& shape, double rho, double eps,
                                   double base_lr) {
  AdaDeltaState s;
  s.mean_sq_grad = VaeParams::zeros(shape.dim(), shape.hidden(), shape.latent_dim(),
                                    shape.num_classes());
  s.mean_sq_delta = s.mean_sq_grad;
  s.rho = rho;
  s.eps = eps;
  s.base_lr = base_lr;
  return s;
}

void adadelta_step(VaeParams& params, const VaeParams& grads, AdaDeltaState& state) {
  if (!params.same_shape(grads) || !params.same_shape(state.mean_sq_grad))
    throw std::invalid_argument("AdaDelta shape mismatch");
  auto p = params.tensors();
  const auto g = grads.tensors();
  auto msg = state.mean_sq_grad.tensors();
  auto msd = state.mean_sq_delta.tensors();
  for (std::size_t t = 0; t < VaeParams::kTensorCount; ++t)
    for (std::size_t i = 0; i < p[t].size(); ++i)
      adadelta_update(p[t][i], g[t][i], msg[t][i], msd[t][i], state.rho, state.eps,
                      state.base_lr);
}

}  // namespace fvq
