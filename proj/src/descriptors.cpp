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

#include "fvq/descriptors.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "fvq/blob_io.hpp"
#include "fvq/rng.hpp"

namespace fvq {

namespace {

constexpr char kCorpusMagic[4] = {'F', 'V', 'Q', '1'};

std::vector<std::vector<Eigen::VectorXd>> draw_means(const SyntheticSpec& spec, Rng& rng) {
  const double scale = spec.separation / std::sqrt(2.0 * spec.dim);
  const double shift = spec.offset * spec.noise_sigma;
  std::vector<std::vector<Eigen::VectorXd>> means(spec.num_classes);
  for (auto& per_class : means) {
    per_class.resize(spec.components_per_class);
    for (auto& mean : per_class) {
      mean.resize(spec.dim);
      for (std::uint32_t j = 0; j < spec.dim; ++j) mean[j] = shift + scale * rng.normal();
    }
  }
  return means;
}

Corpus draw_split(const SyntheticSpec& spec, const std::vector<std::vector<Eigen::VectorXd>>& means,
                  std::uint32_t sets_per_class, Split split, Rng& rng) {
  Corpus corpus;
  corpus.dim = spec.dim;
  corpus.num_classes = spec.num_classes;
  corpus.split = split;
  const std::string prefix = split == Split::train ? "train" : "test";
  for (std::uint32_t c = 0; c < spec.num_classes; ++c) {
    for (std::uint32_t i = 0; i < sets_per_class; ++i) {
      DescriptorSet set;
      set.label = c;
      set.set_id = prefix + "-c" + std::to_string(c) + "-" + std::to_string(i);
      set.descriptors.resize(spec.descriptors_per_set, spec.dim);
      for (std::uint32_t t = 0; t < spec.descriptors_per_set; ++t) {
        const auto& mean = means[c][rng.index(spec.components_per_class)];
        for (std::uint32_t j = 0; j < spec.dim; ++j)
          set.descriptors(t, j) = static_cast<float>(mean[j] + spec.noise_sigma * rng.normal());
      }
      corpus.sets.push_back(std::move(set));
    }
  }
  return corpus;
}

}  // namespace

bool DescriptorSet::operator==(const DescriptorSet& other) const {
  return label == other.label && set_id == other.set_id &&
         descriptors.rows() == other.descriptors.rows() &&
         descriptors.cols() == other.descriptors.cols() &&
         std::memcmp(descriptors.data(), other.descriptors.data(),
                     sizeof(float) * static_cast<std::size_t>(descriptors.size())) == 0;
}

DescriptorGrid::DescriptorGrid(std::size_t height, std::size_t width, std::size_t channels)
    : DescriptorGrid(height, width, channels, std::vector<double>(height * width * channels, 0.0)) {}

DescriptorGrid::DescriptorGrid(std::size_t height, std::size_t width, std::size_t channels,
                               std::vector<double> activations)
    : height_(height), width_(width), channels_(channels), values_(std::move(activations)) {
  if (height_ == 0 || width_ == 0 || channels_ == 0)
    throw std::invalid_argument("grid extents must be >= 1");
  if (values_.size() != height_ * width_ * channels_)
    throw std::invalid_argument("grid activation count does not match H*W*C");
  for (double v : values_)
    if (!std::isfinite(v)) throw std::invalid_argument("grid contains non-finite activation");
}

void Corpus::validate() const {
  if (dim == 0) throw std::invalid_argument("corpus dimension must be >= 1");
  if (num_classes == 0) throw std::invalid_argument("corpus must declare at least one class");
  for (const auto& set : sets) {
    if (set.size() == 0) throw std::invalid_argument("set '" + set.set_id + "' is empty");
    if (set.dim() != dim)
      throw std::invalid_argument("set '" + set.set_id + "' has dimension " +
                                  std::to_string(set.dim()) + ", corpus has " +
                                  std::to_string(dim));
    if (set.label >= num_classes)
      throw std::invalid_argument("set '" + set.set_id + "' has label >= num_classes");
    if (!set.descriptors.allFinite())
      throw std::invalid_argument("set '" + set.set_id + "' contains NaN/Inf entries");
  }
}

std::size_t Corpus::total_descriptors() const {
  std::size_t n = 0;
  for (const auto& set : sets) n += set.size();
  return n;
}

bool Corpus::operator==(const Corpus& other) const {
  return dim == other.dim && num_classes == other.num_classes && split == other.split &&
         sets == other.sets;
}

Corpus load_corpus(const std::filesystem::path& path, Split split) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open corpus '" + path.string() + "'");

  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kCorpusMagic, 4) != 0)
    throw std::runtime_error("malformed header: bad magic");
  Corpus corpus;
  corpus.split = split;
  const std::uint32_t num_sets = io::read_u32(in, "header");
  corpus.dim = io::read_u32(in, "header");
  corpus.num_classes = io::read_u32(in, "header");
  if (corpus.dim == 0 || corpus.num_classes == 0)
    throw std::runtime_error("malformed header: d and num_classes must be >= 1");

  corpus.sets.reserve(num_sets);
  for (std::uint32_t s = 0; s < num_sets; ++s) {
    DescriptorSet set;
    const std::uint32_t id_len = io::read_u32(in, "set id length");
    set.set_id.resize(id_len);
    in.read(set.set_id.data(), id_len);
    if (!in) throw std::runtime_error("truncated file while reading set id");
    set.label = io::read_u32(in, "label");
    if (set.label >= corpus.num_classes)
      throw std::runtime_error("set '" + set.set_id + "': label >= num_classes");
    const std::uint32_t rows = io::read_u32(in, "descriptor count");
    if (rows == 0) throw std::runtime_error("set '" + set.set_id + "': T_x must be >= 1");
    set.descriptors.resize(rows, corpus.dim);
    in.read(reinterpret_cast<char*>(set.descriptors.data()),
            static_cast<std::streamsize>(sizeof(float) * rows * corpus.dim));
    if (!in) throw std::runtime_error("truncated record in set '" + set.set_id + "'");
    if (!set.descriptors.allFinite())
      throw std::runtime_error("set '" + set.set_id + "': NaN/Inf entries");
    corpus.sets.push_back(std::move(set));
  }
  if (in.peek() != std::char_traits<char>::eof())
    throw std::runtime_error("trailing bytes after last record");
  return corpus;
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  corpus.validate();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out.write(kCorpusMagic, 4);
  io::write_u32(out, static_cast<std::uint32_t>(corpus.sets.size()));
  io::write_u32(out, corpus.dim);
  io::write_u32(out, corpus.num_classes);
  for (const auto& set : corpus.sets) {
    io::write_u32(out, static_cast<std::uint32_t>(set.set_id.size()));
    out.write(set.set_id.data(), static_cast<std::streamsize>(set.set_id.size()));
    io::write_u32(out, set.label);
    io::write_u32(out, static_cast<std::uint32_t>(set.size()));
    io::write_f32(out, std::span<const float>(set.descriptors.data(),
                                              static_cast<std::size_t>(set.descriptors.size())));
  }
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

void SyntheticSpec::validate() const {
  if (num_classes == 0 || sets_per_class == 0 || descriptors_per_set == 0 || dim == 0 ||
      components_per_class == 0)
    throw std::invalid_argument("synthetic spec counts must be >= 1");
  if (!(separation > 0.0)) throw std::invalid_argument("separation must be > 0");
  if (!(noise_sigma > 0.0)) throw std::invalid_argument("noise_sigma must be > 0");
  if (!std::isfinite(offset)) throw std::invalid_argument("offset must be finite");
}

std::vector<std::vector<Eigen::VectorXd>> synthetic_means(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  return draw_means(spec, rng);
}

std::pair<Corpus, Corpus> generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const auto means = draw_means(spec, rng);
  Corpus train = draw_split(spec, means, spec.sets_per_class, Split::train, rng);
  const std::uint32_t test_count =
      spec.test_sets_per_class == 0 ? spec.sets_per_class : spec.test_sets_per_class;
  Corpus test = draw_split(spec, means, test_count, Split::test, rng);
  return {std::move(train), std::move(test)};
}

}  // namespace fvq
