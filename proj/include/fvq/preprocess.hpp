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

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fvq/descriptors.hpp"
#include "fvq/rng.hpp"

namespace fvq {

inline constexpr double kNormEpsilon = 1e-12;

// v / ||v||; vectors with norm below kNormEpsilon are returned unchanged.
Eigen::VectorXd l2_normalize(const Eigen::VectorXd& v);

// Applies l2_normalize to every descriptor of every set.
Corpus l2_normalize_corpus(const Corpus& corpus);

struct SppConfig {
  std::vector<std::size_t> levels{6, 3, 2, 1};

  std::size_t descriptor_count() const;
};

// Multi-level max pooling. Bin (i, j) of level n covers rows
// [floor(iH/n), ceil((i+1)H/n)) and columns [floor(jW/n), ceil((j+1)W/n)).
// Output rows are ordered by level, then row-major over (i, j).
DescriptorSet spp_pool(const DescriptorGrid& grid, const SppConfig& cfg,
                       std::uint32_t label = 0, std::string set_id = {});

// Inverted dropout mask: each entry is 0 with probability `rate`, otherwise
// 1 / (1 - rate).
Eigen::VectorXd dropout_mask(std::size_t d, double rate, Rng& rng);

}  // namespace fvq
