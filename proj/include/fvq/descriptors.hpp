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

// Labeled descriptor sets, the corpus container and its binary format, and the
// class-conditional mixture generator used for desk-scale experiments.
//
// Corpus file layout (little-endian, no padding):
//   "FVQ1" | u32 num_sets | u32 d | u32 num_classes
//   per set: u32 id_len | id bytes | u32 label | u32 T | T*d float32 row-major

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace fvq {

using RowMatrixf = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct DescriptorSet {
  RowMatrixf descriptors;  // T x d
  std::uint32_t label = 0;
  std::string set_id;

  std::size_t size() const { return static_cast<std::size_t>(descriptors.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(descriptors.cols()); }
  Eigen::VectorXd row(std::size_t t) const {
    return descriptors.row(static_cast<Eigen::Index>(t)).cast<double>().transpose();
  }

  bool operator==(const DescriptorSet& other) const;
};

// H x W x C activation grid, stored row-major over (h, w, c).
class DescriptorGrid {
 public:
  DescriptorGrid(std::size_t height, std::size_t width, std::size_t channels);
  DescriptorGrid(std::size_t height, std::size_t width, std::size_t channels,
                 std::vector<double> activations);

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t channels() const { return channels_; }

  double& at(std::size_t h, std::size_t w, std::size_t c) {
    return values_[(h * width_ + w) * channels_ + c];
  }
  double at(std::size_t h, std::size_t w, std::size_t c) const {
    return values_[(h * width_ + w) * channels_ + c];
  }
  const std::vector<double>& values() const { return values_; }

 private:
  std::size_t height_, width_, channels_;
  std::vector<double> values_;
};

enum class Split { train, test };

struct Corpus {
  std::vector<DescriptorSet> sets;
  std::uint32_t dim = 0;
  std::uint32_t num_classes = 0;
  Split split = Split::train;

  // Throws std::invalid_argument describing the first broken invariant.
  void validate() const;
  std::size_t total_descriptors() const;
  bool operator==(const Corpus& other) const;
};

Corpus load_corpus(const std::filesystem::path& path, Split split = Split::train);
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);

struct SyntheticSpec {
  std::uint32_t num_classes = 4;
  std::uint32_t sets_per_class = 100;
  // Number of test sets per class; 0 means "same as sets_per_class".
  std::uint32_t test_sets_per_class = 0;
  std::uint32_t descriptors_per_set = 20;
  std::uint32_t dim = 16;
  std::uint32_t components_per_class = 2;
  double separation = 4.0;
  double noise_sigma = 1.0;
  // Common shift of every mean coordinate, in units of noise_sigma. Keeps
  // descriptors mostly nonnegative, like rectified activations.
  double offset = 2.0;
  std::uint64_t seed = 7;

  void validate() const;
};

// Each class owns `components_per_class` component means drawn as
// offset * noise_sigma + N(0, s^2 I) with s = separation / sqrt(2 d), so the
// expected distance between two means equals `separation`. Every descriptor picks one of its class's
// components uniformly and adds isotropic N(0, noise_sigma^2) noise. Values are
// rounded to float32 so that the returned corpora round-trip through files.
std::pair<Corpus, Corpus> generate_synthetic(const SyntheticSpec& spec);

// Component means used by generate_synthetic, indexed [class][component].
std::vector<std::vector<Eigen::VectorXd>> synthetic_means(const SyntheticSpec& spec);

}  // namespace fvq
