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

#include <cstdint>
#include <vector>

#include "fvq/vae.hpp"  // RowMatrixd

namespace fvq {

// Index of the nearest row of `centroids` to x; ties go to the lowest index.
std::size_t nearest_centroid(const RowMatrixd& centroids, const Eigen::VectorXd& x);

// k-means++ seeding. Throws if the data has fewer than k distinct rows.
RowMatrixd kmeanspp_seed(const RowMatrixd& data, std::size_t k, std::uint64_t seed);

struct KMeansResult {
  RowMatrixd centroids;
  std::vector<std::size_t> assignment;
  // Within-cluster sum of squares after each centroid update.
  std::vector<double> wcss_trace;
  std::size_t iterations = 0;
};

// Lloyd iterations from `init` until the assignment stops changing or
// `max_iterations` is reached. Empty clusters keep their previous centroid.
KMeansResult lloyd(const RowMatrixd& data, RowMatrixd init, std::size_t max_iterations = 200);

}  // namespace fvq
