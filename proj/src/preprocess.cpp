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

#include "fvq/preprocess.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace fvq {

Eigen::VectorXd l2_normalize(const Eigen::VectorXd& v) {
  const double norm = v.norm();
  if (norm < kNormEpsilon) return v;
  return v / norm;
}

Corpus l2_normalize_corpus(const Corpus& corpus) {
  Corpus out = corpus;
  for (auto& set : out.sets) {
    for (Eigen::Index t = 0; t < set.descriptors.rows(); ++t) {
      const Eigen::VectorXd v = set.descriptors.row(t).cast<double>().transpose();
      set.descriptors.row(t) = l2_normalize(v).cast<float>().transpose();
    }
  }
  return out;
}

std::size_t SppConfig::descriptor_count() const {
  std::size_t n = 0;
  for (std::size_t level : levels) n += level * level;
  return n;
}

DescriptorSet spp_pool(const DescriptorGrid& grid, const SppConfig& cfg, std::uint32_t label,
                       std::string set_id) {
  const std::size_t H = grid.height(), W = grid.width(), C = grid.channels();
  for (std::size_t n : cfg.levels) {
    if (n == 0) throw std::invalid_argument("pyramid level must be >= 1");
    if (n > H || n > W) throw std::invalid_argument("pyramid level exceeds grid");
  }

  DescriptorSet out;
  out.label = label;
  out.set_id = std::move(set_id);
  out.descriptors.resize(static_cast<Eigen::Index>(cfg.descriptor_count()),
                         static_cast<Eigen::Index>(C));
  Eigen::Index row = 0;
  for (std::size_t n : cfg.levels) {
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t h0 = i * H / n, h1 = ((i + 1) * H + n - 1) / n;
      for (std::size_t j = 0; j < n; ++j) {
        const std::size_t w0 = j * W / n, w1 = ((j + 1) * W + n - 1) / n;
        for (std::size_t c = 0; c < C; ++c) {
          double best = -std::numeric_limits<double>::infinity();
          for (std::size_t h = h0; h < h1; ++h)
            for (std::size_t w = w0; w < w1; ++w) best = std::max(best, grid.at(h, w, c));
          out.descriptors(row, static_cast<Eigen::Index>(c)) = static_cast<float>(best);
        }
        ++row;
      }
    }
  }
  return out;
}

Eigen::VectorXd dropout_mask(std::size_t d, double rate, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) throw std::invalid_argument("dropout rate must be in [0, 1)");
  const double keep_scale = 1.0 / (1.0 - rate);
  Eigen::VectorXd mask(static_cast<Eigen::Index>(d));
  for (std::size_t j = 0; j < d; ++j) mask[static_cast<Eigen::Index>(j)] = rng.uniform() < rate ? 0.0 : keep_scale;
  return mask;
}

}  // namespace fvq
