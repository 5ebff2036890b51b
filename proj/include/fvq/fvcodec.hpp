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

// Fisher Vector extraction from a trained VAE.
//
// The generative parameters are the decoder weights and bias. For one
// descriptor x with z = mu_z (no sampling, no dropout), the reconstruction
// gradient is r [z^T, 1] with r = ((mu_x - x) / sigma_x^2) * 1[mu_x > 0].
// Flattened layout, M = (latent + 1) * dim entries:
//   [k * dim + j]          d rec / d dec_w(k, j) = z_k r_j
//   [latent * dim + j]     d rec / d dec_b(j)    = r_j

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fvq/descriptors.hpp"
#include "fvq/vae.hpp"

namespace fvq {

struct FvFlags {
  bool fim_applied = false;
  bool power_applied = false;
  bool l2_applied = false;

  bool operator==(const FvFlags&) const = default;
};

struct FisherVector {
  Eigen::VectorXd values;
  FvFlags flags;

  std::size_t size() const { return static_cast<std::size_t>(values.size()); }
};

// Diagonal empirical Fisher information, stored as F^{-1/2}.
struct FimDiagonal {
  Eigen::VectorXd inv_sqrt;
  double eps_floor = 1e-12;

  // True when the coordinate's second moment was clamped to eps_floor.
  bool floored(std::size_t i) const;
};

inline std::size_t fv_dimension(std::size_t dim, std::size_t latent_dim) {
  return (latent_dim + 1) * dim;
}

Eigen::VectorXd rec_grad(const VaeParams& params, const Eigen::VectorXd& x);

// Unnormalized set score -sum_t rec_grad(x_t), the log-likelihood gradient.
Eigen::VectorXd set_score(const VaeParams& params, const DescriptorSet& set);

FimDiagonal estimate_fim(const VaeParams& params, const Corpus& corpus, double eps_floor = 1e-12);

FisherVector extract_fv(const VaeParams& params, const FimDiagonal& fim, const DescriptorSet& set);

// Elementwise mean, e.g. frame-level FVs into a video-level FV.
FisherVector aggregate_fvs(std::span<const FisherVector> fvs);

// Signed square root followed by L2 normalization.
FisherVector power_l2_normalize(const FisherVector& fv);

double fisher_kernel(const FisherVector& a, const FisherVector& b);

// Per-descriptor L1 mass of its normalized FV contribution.
std::vector<double> attention_values(const VaeParams& params, const FimDiagonal& fim,
                                     const DescriptorSet& set);

struct PcaModel {
  Eigen::VectorXd mean;               // length M
  Eigen::MatrixXd basis;              // M x k, orthonormal columns
  Eigen::VectorXd explained_variance; // length k, nonincreasing
  RowMatrixd projected;               // N x k

  Eigen::VectorXd project(const Eigen::VectorXd& x) const;
  RowMatrixd reconstruct() const;
};

// Top-k principal directions of the rows of `data` (N x M) via the N x N Gram
// matrix of the centered rows.
PcaModel pca_compress(const RowMatrixd& data, std::size_t k);

void save_fim(const std::filesystem::path& path, const FimDiagonal& fim, std::size_t dim,
              std::size_t latent_dim);
FimDiagonal load_fim(const std::filesystem::path& path);

}  // namespace fvq
