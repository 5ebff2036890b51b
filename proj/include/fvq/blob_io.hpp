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

// Little-endian primitive I/O and the "JSON header + float32 blobs" container
// shared by checkpoints, baseline models and FV/FIM exports.

#include <bit>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace fvq::io {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

void write_u32(std::ostream& out, std::uint32_t v);
void write_f32(std::ostream& out, std::span<const float> values);
std::uint32_t read_u32(std::istream& in, const char* what);
void read_f32(std::istream& in, std::span<float> values, const char* what);

// Converts doubles to float32 and writes them.
void write_as_f32(std::ostream& out, std::span<const double> values);
// Reads float32 values and widens them into `values`.
void read_into_f64(std::istream& in, std::span<double> values, const char* what);

// Model container: magic "FVQM", u32 header length, UTF-8 JSON header, then
// float32 payload. The header's "tensors" array lists name and element count
// in payload order.
struct ModelFile {
  nlohmann::json header;
  std::vector<std::string> names;
  std::vector<std::vector<double>> tensors;

  void add(std::string name, std::span<const double> values);
  const std::vector<double>& get(const std::string& name) const;
};

void save_model_file(const ModelFile& file, const std::filesystem::path& path);
ModelFile load_model_file(const std::filesystem::path& path);

// Raw float32 row matrix plus JSON sidecar at `<path>.json`.
void save_matrix_with_sidecar(const std::filesystem::path& path, std::span<const double> rowmajor,
                              std::size_t rows, std::size_t cols, nlohmann::json sidecar);
struct MatrixWithSidecar {
  std::vector<double> values;
  std::size_t rows = 0;
  std::size_t cols = 0;
  nlohmann::json sidecar;
};
MatrixWithSidecar load_matrix_with_sidecar(const std::filesystem::path& path);

std::filesystem::path sidecar_path(const std::filesystem::path& path);

// Writes `text` to `path`, throwing on failure.
void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace fvq::io
