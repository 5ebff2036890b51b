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

#pragma once

// Variational auto-encoder over local descriptors:
//
//   encoder   mu_z = W2^T relu(W1^T x + b1) + b2
//   sampling  z    = mu_z + eps * exp(log_var_z / 2)
//   decoder   mu_x = relu(Wd^T z + bd)
//   head      logits = Wc^T z + bc
//
// sigma_x^2 (scalar) and sigma_z^2 (per latent coordinate) are shared across
// all descriptors and learned as log-variances. Training minimizes
// lambda1 * rec + lambda2 * reg + lambda3 * cls with AdaDelta.

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "fvq/descriptors.hpp"
#include "fvq/rng.hpp"
#include "json.hpp"

namespace fvq {

using RowMatrixd = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct VaeConfig {
  std::size_t dim = 0;
  std::size_t hidden = 0;  // 0 means "same as dim"
  std::size_t latent_dim = 255;
  std::size_t num_classes = 1;
  double lambda1 = 1.0;
  double lambda2 = 1.0;
  double lambda3 = 1.0;
  double dropout_rate = 0.5;
  std::size_t batch_size = 128;
  std::size_t max_batches = 5000;
  std::uint64_t seed = 0;

  std::size_t hidden_width() const { return hidden == 0 ? dim : hidden; }
  void validate() const;
};

void to_json(nlohmann::json& j, const VaeConfig& cfg);
void from_json(const nlohmann::json& j, VaeConfig& cfg);

struct VaeParams {
  RowMatrixd enc_w1;  // dim x hidden
  Eigen::VectorXd enc_b1;
  RowMatrixd enc_w2;  // hidden x latent
  Eigen::VectorXd enc_b2;
  RowMatrixd dec_w;  // latent x dim
  Eigen::VectorXd dec_b;
  RowMatrixd cls_w;  // latent x classes
  Eigen::VectorXd cls_b;
  double log_var_x = 0.0;
  Eigen::VectorXd log_var_z;

  static constexpr std::size_t kTensorCount = 10;
  static const std::array<std::string_view, kTensorCount>& tensor_names();

  static VaeParams zeros(std::size_t dim, std::size_t hidden, std::size_t latent,
                         std::size_t classes);
  // Scaled-uniform weights (bound sqrt(6 / (fan_in + fan_out))), zero biases,
  // unit variances.
  static VaeParams initialize(const VaeConfig& cfg, Rng& rng);

  std::size_t dim() const { return static_cast<std::size_t>(dec_w.cols()); }
  std::size_t hidden() const { return static_cast<std::size_t>(enc_w1.cols()); }
  std::size_t latent_dim() const { return static_cast<std::size_t>(dec_w.rows()); }
  std::size_t num_classes() const { return static_cast<std::size_t>(cls_w.cols()); }

  // Row-major views of every tensor, in the fixed checkpoint order.
  std::array<std::span<double>, kTensorCount> tensors();
  std::array<std::span<const double>, kTensorCount> tensors() const;

  bool same_shape(const VaeParams& other) const;
  bool allFinite() const;
};

struct LossBreakdown {
  double rec = 0.0;
  double reg = 0.0;
  double cls = 0.0;
  double total = 0.0;
  double lower_bound = 0.0;  // -(rec + reg)
};

Eigen::VectorXd encoder_forward(const VaeParams& params, const Eigen::VectorXd& x);
Eigen::VectorXd sample_latent(const Eigen::VectorXd& mu_z, const Eigen::VectorXd& log_var_z,
                              Rng& rng);
Eigen::VectorXd decoder_forward(const VaeParams& params, const Eigen::VectorXd& z);

// Full Gaussian negative log-likelihood with sigma^2 = exp(log_var_x) I.
double reconstruction_loss(const Eigen::VectorXd& x, const Eigen::VectorXd& mu_x,
                           double log_var_x);
// KL(N(mu_z, diag(exp(log_var_z))) || N(0, I)).
double regularization_loss(const Eigen::VectorXd& mu_z, const Eigen::VectorXd& log_var_z);
// Softmax cross-entropy of the linear head on z.
double classification_loss(const VaeParams& params, const Eigen::VectorXd& z, std::size_t label);

// Randomness consumed by one training sample: the encoder-input dropout mask
// and the reparameterization noise.
struct SampleNoise {
  Eigen::VectorXd mask;  // length dim
  Eigen::VectorXd eps;   // length latent_dim
};
SampleNoise draw_noise(const VaeConfig& cfg, Rng& rng);

struct LossAndGrads {
  LossBreakdown loss;
  VaeParams grads;
};

// Loss and analytic gradients for one clean descriptor `x` under fixed noise.
// The encoder sees x * mask; the reconstruction target is x itself.
LossAndGrads loss_and_grads(const VaeParams& params, const Eigen::VectorXd& x, std::size_t label,
                            const VaeConfig& cfg, const SampleNoise& noise);

// Same, drawing the noise from `rng`.
LossAndGrads fused_loss_and_grads(const VaeParams& params, const Eigen::VectorXd& x,
                                  std::size_t label, const VaeConfig& cfg, Rng& rng);

struct AdaDeltaState {
  VaeParams mean_sq_grad;
  VaeParams mean_sq_delta;
  double rho = 0.95;
  double eps = 1e-6;
  double base_lr = 1.0;

  static AdaDeltaState fresh(const VaeParams& shape, double rho = 0.95, double eps = 1e-6,
                             double base_lr = 1.0);
};

// One AdaDelta update of a single scalar; returns the applied delta.
inline double adadelta_update(double& param, double grad, double& mean_sq_grad,
                              double& mean_sq_delta, double rho, double eps, double base_lr);

void adadelta_step(VaeParams& params, const VaeParams& grads, AdaDeltaState& state);

struct TrainingTrace {
  std::vector<LossBreakdown> batches;

  std::string to_csv() const;
  // Mean total loss over batches [begin, end).
  double mean_total(std::size_t begin, std::size_t end) const;
};

struct TrainResult {
  VaeParams initial;
  VaeParams params;
  TrainingTrace trace;
};

// Minibatch AdaDelta training. Descriptors are drawn uniformly with
// replacement from the whole corpus; each sample gets a fresh dropout mask
// and latent noise. Deterministic given cfg.seed.
TrainResult train_vae(const Corpus& corpus, const VaeConfig& cfg);

struct Checkpoint {
  VaeParams params;
  VaeConfig cfg;
  std::size_t batch_index = 0;
};
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

inline double adadelta_update(double& param, double grad, double& mean_sq_grad,
                              double& mean_sq_delta, double rho, double eps, double base_lr) {
  mean_sq_grad = rho * mean_sq_grad + (1.0 - rho) * grad * grad;
  const double delta =
      -base_lr * std::sqrt(mean_sq_delta + eps) / std::sqrt(mean_sq_grad + eps) * grad;
  mean_sq_delta = rho * mean_sq_delta + (1.0 - rho) * delta * delta;
  param += delta;
  return delta;
}

}  // namespace fvq
