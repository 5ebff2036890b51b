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

#include "fvq/kmeans.hpp"

#include <limits>
#include <stdexcept>

#include "fvq/rng.hpp"

namespace fvq {

std::size_t nearest_centroid(const RowMatrixd& centroids, const Eigen::VectorXd& x) {
  std::size_t best = 0;
  double best_dist = std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < centroids.rows(); ++k) {
    const double dist = (centroids.row(k).transpose() - x).squaredNorm();
    if (dist < best_dist) {
      best_dist = dist;
      best = static_cast<std::size_t>(k);
    }
  }
  return best;
}

RowMatrixd kmeanspp_seed(const RowMatrixd& data, std::size_t k, std::uint64_t seed) {
  const auto n = static_cast<std::size_t>(data.rows());
  if (k == 0) throw std::invalid_argument("number of centers must be >= 1");
  if (n < k) throw std::invalid_argument("need at least as many descriptors as centers (N < K)");

  Rng rng(seed);
  RowMatrixd centers(static_cast<Eigen::Index>(k), data.cols());
  centers.row(0) = data.row(static_cast<Eigen::Index>(rng.index(n)));
  std::vector<double> dist(n);
  for (std::size_t i = 0; i < n; ++i) dist[i] = (data.row(i) - centers.row(0)).squaredNorm();

  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (double v : dist) total += v;
    if (!(total > 0.0)) throw std::invalid_argument("fewer distinct descriptors than centers");
    const double target = rng.uniform() * total;
    std::size_t pick = n;
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      acc += dist[i];
      if (dist[i] > 0.0 && acc > target) {
        pick = i;
        break;
      }
    }
    if (pick == n)  // rounding left target at the very end
      for (std::size_t i = n; i-- > 0;)
        if (dist[i] > 0.0) {
          pick = i;
          break;
        }
    centers.row(static_cast<Eigen::Index>(c)) = data.row(static_cast<Eigen::Index>(pick));
    for (std::size_t i = 0; i < n; ++i)
      dist[i] = std::min(dist[i], (data.row(i) - centers.row(c)).squaredNorm());
  }
  return centers;
}

KMeansResult lloyd(const RowMatrixd& data, RowMatrixd init, std::size_t max_iterations) {
  const auto n = static_cast<std::size_t>(data.rows());
  const Eigen::Index k = init.rows();
  KMeansResult res;
  res.centroids = std::move(init);
  res.assignment.assign(n, std::numeric_limits<std::size_t>::max());

  for (std::size_t it = 0; it < max_iterations; ++it) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t a = nearest_centroid(res.centroids, data.row(i).transpose());
      if (a != res.assignment[i]) {
        res.assignment[i] = a;
        changed = true;
      }
    }
    if (!changed) break;
    ++res.iterations;

    RowMatrixd sums = RowMatrixd::Zero(k, data.cols());
    std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
    for (std::size_t i = 0; i < n; ++i) {
      sums.row(res.assignment[i]) += data.row(i);
      ++counts[res.assignment[i]];
    }
    for (Eigen::Index c = 0; c < k; ++c)
      if (counts[c] > 0) res.centroids.row(c) = sums.row(c) / static_cast<double>(counts[c]);

    double wcss = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      wcss += (data.row(i) - res.centroids.row(res.assignment[i])).squaredNorm();
    res.wcss_trace.push_back(wcss);
  }
  return res;
}

}  // namespace fvq
