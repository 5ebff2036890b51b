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
#include <filesystem>
#include <vector>

#include "fvq/vae.hpp"  // RowMatrixd

namespace fvq {

struct SvmOptions {
  double c_svm = 100.0;
  std::size_t epochs = 200;
  std::uint64_t seed = 0;
};

// One-vs-all linear SVM, one row of weights per class.
struct SvmModel {
  RowMatrixd weights;  // classes x M
  Eigen::VectorXd biases;
  double c_svm = 100.0;

  std::size_t num_classes() const { return static_cast<std::size_t>(weights.rows()); }
  // N x classes decision values.
  RowMatrixd scores(const RowMatrixd& features) const;
};

// Per class minimizes 1/2 |w|^2 + C sum_i max(0, 1 - y_i (w.x_i + b)) with
// Pegasos-style sub-gradient steps 1 / (lambda t), lambda = 1 / (C N). The
// bias is handled as a weight on a constant unit feature. Every class visits
// the samples in the same seeded per-epoch order.
SvmModel train_svm(const RowMatrixd& features, const std::vector<std::uint32_t>& labels,
                   std::size_t num_classes, const SvmOptions& options = {});

void save_svm(const std::filesystem::path& path, const SvmModel& model);
SvmModel load_svm(const std::filesystem::path& path);

}  // namespace fvq
