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

#include "fvq/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace fvq {

double top_k_accuracy(const RowMatrixd& scores, const std::vector<std::uint32_t>& labels,
                      std::size_t k) {
  const auto n = static_cast<std::size_t>(scores.rows());
  if (labels.size() != n) throw std::invalid_argument("label count does not match scores");
  if (n == 0) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = scores.row(static_cast<Eigen::Index>(i));
    const double own = row[labels[i]];
    // Rank of the true class: classes scoring higher, or equal with lower index.
    std::size_t ahead = 0;
    for (Eigen::Index c = 0; c < row.size(); ++c)
      if (row[c] > own || (row[c] == own && c < static_cast<Eigen::Index>(labels[i]))) ++ahead;
    if (ahead < k) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(n);
}

double average_precision(const Eigen::VectorXd& scores, const std::vector<bool>& positive) {
  const auto n = static_cast<std::size_t>(scores.size());
  const auto total_pos = static_cast<std::size_t>(std::count(positive.begin(), positive.end(), true));
  if (total_pos == 0) return 0.0;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  double ap = 0.0;
  std::size_t tp = 0, seen = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t group_tp = 0, j = i;
    for (; j < n && scores[order[j]] == scores[order[i]]; ++j)
      if (positive[order[j]]) ++group_tp;
    tp += group_tp;
    seen = j;
    ap += static_cast<double>(group_tp) / static_cast<double>(total_pos) *
          static_cast<double>(tp) / static_cast<double>(seen);
    i = j;
  }
  return ap;
}

double mean_average_precision(const RowMatrixd& scores, const std::vector<std::uint32_t>& labels) {
  double sum = 0.0;
  std::size_t counted = 0;
  for (Eigen::Index c = 0; c < scores.cols(); ++c) {
    std::vector<bool> positive(labels.size());
    bool any = false;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      positive[i] = labels[i] == static_cast<std::uint32_t>(c);
      any = any || positive[i];
    }
    if (!any) continue;
    sum += average_precision(scores.col(c), positive);
    ++counted;
  }
  return counted == 0 ? 0.0 : sum / static_cast<double>(counted);
}

Metrics evaluate(const RowMatrixd& scores, const std::vector<std::uint32_t>& labels) {
  return Metrics{top_k_accuracy(scores, labels, 1), top_k_accuracy(scores, labels, 3),
                 mean_average_precision(scores, labels)};
}

Metrics evaluate(const SvmModel& model, const RowMatrixd& features,
                 const std::vector<std::uint32_t>& labels) {
  return evaluate(model.scores(features), labels);
}

}  // namespace fvq
