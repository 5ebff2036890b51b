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

#include "fvq/svm.hpp"

#include <numeric>
#include <set>
#include <stdexcept>

#include "fvq/blob_io.hpp"
#include "fvq/rng.hpp"

namespace fvq {

RowMatrixd SvmModel::scores(const RowMatrixd& features) const {
  if (features.cols() != weights.cols()) throw std::invalid_argument("feature dimension mismatch");
  RowMatrixd out = features * weights.transpose();
  out.rowwise() += biases.transpose();
  return out;
}

SvmModel train_svm(const RowMatrixd& features, const std::vector<std::uint32_t>& labels,
                   std::size_t num_classes, const SvmOptions& options) {
  const auto n = static_cast<std::size_t>(features.rows());
  if (labels.size() != n) throw std::invalid_argument("label count does not match features");
  if (n < 2) throw std::invalid_argument("SVM training needs at least two samples");
  if (!(options.c_svm > 0.0)) throw std::invalid_argument("c_svm must be > 0");
  const std::set<std::uint32_t> present(labels.begin(), labels.end());
  if (present.size() < 2) throw std::invalid_argument("SVM training needs at least two classes");
  if (*present.rbegin() >= num_classes) throw std::invalid_argument("label >= num_classes");

  // Seeded visiting order, shared by all one-vs-all heads.
  Rng rng(options.seed);
  std::vector<std::vector<std::uint32_t>> orders(options.epochs);
  std::vector<std::uint32_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0u);
  for (auto& order : orders) {
    for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.index(i)]);
    order = perm;
  }

  const double lambda = 1.0 / (options.c_svm * static_cast<double>(n));
  SvmModel model;
  model.c_svm = options.c_svm;
  model.weights = RowMatrixd::Zero(static_cast<Eigen::Index>(num_classes), features.cols());
  model.biases = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(num_classes));

  for (std::size_t c = 0; c < num_classes; ++c) {
    Eigen::VectorXd w = Eigen::VectorXd::Zero(features.cols());
    double b = 0.0;
    std::size_t t = 0;
    for (const auto& order : orders) {
      for (std::uint32_t i : order) {
        ++t;
        const double eta = 1.0 / (lambda * static_cast<double>(t));
        const double y = labels[i] == c ? 1.0 : -1.0;
        const double margin = y * (features.row(i).dot(w) + b);
        const double shrink = 1.0 - 1.0 / static_cast<double>(t);
        w *= shrink;
        b *= shrink;
        if (margin < 1.0) {
          w += eta * y * features.row(i).transpose();
          b += eta * y;
        }
      }
    }
    model.weights.row(static_cast<Eigen::Index>(c)) = w.transpose();
    model.biases[static_cast<Eigen::Index>(c)] = b;
  }
  return model;
}

void save_svm(const std::filesystem::path& path, const SvmModel& model) {
  io::ModelFile file;
  file.header = {{"format", "fvq-svm"},
                 {"classes", model.num_classes()},
                 {"M", model.weights.cols()},
                 {"c_svm", model.c_svm}};
  file.add("weights", std::span<const double>(model.weights.data(), model.weights.size()));
  file.add("biases", std::span<const double>(model.biases.data(), model.biases.size()));
  io::save_model_file(file, path);
}

SvmModel load_svm(const std::filesystem::path& path) {
  const io::ModelFile file = io::load_model_file(path);
  if (file.header.value("format", "") != "fvq-svm") throw std::runtime_error("not an SVM model file");
  const auto k = file.header.at("classes").get<Eigen::Index>();
  const auto m = file.header.at("M").get<Eigen::Index>();
  SvmModel model;
  model.c_svm = file.header.at("c_svm").get<double>();
  model.weights = Eigen::Map<const RowMatrixd>(file.get("weights").data(), k, m);
  model.biases = Eigen::Map<const Eigen::VectorXd>(file.get("biases").data(), k);
  return model;
}

}  // namespace fvq
