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

#include "fvq/svm.hpp"

namespace fvq {

struct Metrics {
  double top1 = 0.0;
  double top3 = 0.0;
  double map = 0.0;
};

// Fraction of rows whose label is among the k highest scores; ties between
// classes go to the lower class index.
double top_k_accuracy(const RowMatrixd& scores, const std::vector<std::uint32_t>& labels,
                      std::size_t k);

// Area under the step precision-recall curve, one step per distinct score
// threshold (tied scores enter together). Returns 0 with no positives.
double average_precision(const Eigen::VectorXd& scores, const std::vector<bool>& positive);

// Mean AP over classes that have at least one positive.
double mean_average_precision(const RowMatrixd& scores, const std::vector<std::uint32_t>& labels);

Metrics evaluate(const RowMatrixd& scores, const std::vector<std::uint32_t>& labels);
Metrics evaluate(const SvmModel& model, const RowMatrixd& features,
                 const std::vector<std::uint32_t>& labels);

}  // namespace fvq
