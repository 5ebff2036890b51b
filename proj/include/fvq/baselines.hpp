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

// Classical quantizers used as comparison points: GMM Fisher Vectors, VLAD,
// bilinear pooling, average pooling and plain concatenation.

#include <cstdint>
#include <filesystem>
#include <vector>

#include <Eigen/Dense>

#include "fvq/descriptors.hpp"
#include "fvq/fvcodec.hpp"
#include "fvq/vae.hpp"

namespace fvq {

// All descriptors of a corpus stacked into one N x d matrix.
RowMatrixd stack_descriptors(const Corpus& corpus);

struct GmmModel {
  Eigen::VectorXd weights;  // K
  RowMatrixd means;         // K x d
  RowMatrixd variances;     // K x d, diagonal

  std::size_t components() const { return static_cast<std::size_t>(means.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(means.cols()); }

  // Posterior responsibilities gamma(k) of one descriptor.
  Eigen::VectorXd responsibilities(const Eigen::VectorXd& x) const;
  double log_likelihood(const Eigen::VectorXd& x) const;
};

struct GmmFitOptions {
  std::size_t max_iterations = 200;
  double relative_tolerance = 1e-6;
  double variance_floor_scale = 1e-6;  // times the mean global variance
};

// k-means++ seeded EM. `ll_trace`, when given, receives the total data
// log-likelihood evaluated at the start of every EM iteration.
GmmModel fit_gmm(const RowMatrixd& descriptors, std::size_t k, std::uint64_t seed,
                 const GmmFitOptions& options = {}, std::vector<double>* ll_trace = nullptr);

// Mean and variance gradients, 2 K d entries. Per component k the block at
// offset 2 k d holds
//   mean:      sum_t gamma_t(k) (x_t - mu_k) / sigma_k / sqrt(w_k)
//   variance:  sum_t gamma_t(k) ((x_t - mu_k)^2 / sigma_k^2 - 1) / sqrt(2 w_k)
// Sums are not divided by T.
FisherVector gmm_fv_encode(const GmmModel& model, const DescriptorSet& set);

struct VladCodebook {
  RowMatrixd centroids;  // K x d

  std::size_t centers() const { return static_cast<std::size_t>(centroids.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(centroids.cols()); }
};

// k-means++ then Lloyd. `wcss_trace` receives the within-cluster sum of
// squares after every update.
VladCodebook fit_vlad(const RowMatrixd& descriptors, std::size_t k, std::uint64_t seed,
                      std::vector<double>* wcss_trace = nullptr);

// Per-centroid residual sums over hard nearest-centroid assignments.
Eigen::VectorXd vlad_encode(const VladCodebook& codebook, const DescriptorSet& set);

// sum_t x_t x_t^T, flattened row-major (d^2 entries).
Eigen::VectorXd bilinear_encode(const DescriptorSet& set);

Eigen::VectorXd average_encode(const DescriptorSet& set);

// Row-major flattening of the grid (H * W * C entries).
Eigen::VectorXd concat_encode(const DescriptorGrid& grid);
// Same layout for a set whose rows are grid cells in row-major order.
Eigen::VectorXd concat_encode(const DescriptorSet& set);

void save_gmm(const std::filesystem::path& path, const GmmModel& model);
GmmModel load_gmm(const std::filesystem::path& path);
void save_vlad(const std::filesystem::path& path, const VladCodebook& codebook);
VladCodebook load_vlad(const std::filesystem::path& path);

}  // namespace fvq
