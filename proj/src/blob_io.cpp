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

#include "fvq/blob_io.hpp"

#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace fvq::io {

namespace {

constexpr char kModelMagic[4] = {'F', 'V', 'Q', 'M'};

void check_stream(std::istream& in, const char* what) {
  if (!in) throw std::runtime_error(std::string("truncated file while reading ") + what);
}

}  // namespace

void write_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

void write_f32(std::ostream& out, std::span<const float> values) {
  out.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(values.size_bytes()));
}

std::uint32_t read_u32(std::istream& in, const char* what) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  check_stream(in, what);
  return v;
}

void read_f32(std::istream& in, std::span<float> values, const char* what) {
  in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size_bytes()));
  check_stream(in, what);
}

void write_as_f32(std::ostream& out, std::span<const double> values) {
  std::vector<float> buf(values.begin(), values.end());
  write_f32(out, buf);
}

void read_into_f64(std::istream& in, std::span<double> values, const char* what) {
  std::vector<float> buf(values.size());
  read_f32(in, buf, what);
  std::copy(buf.begin(), buf.end(), values.begin());
}

void ModelFile::add(std::string name, std::span<const double> values) {
  names.push_back(std::move(name));
  tensors.emplace_back(values.begin(), values.end());
}

const std::vector<double>& ModelFile::get(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return tensors[i];
  throw std::runtime_error("model file has no tensor '" + name + "'");
}

void save_model_file(const ModelFile& file, const std::filesystem::path& path) {
  nlohmann::json header = file.header;
  header["tensors"] = nlohmann::json::array();
  for (std::size_t i = 0; i < file.names.size(); ++i)
    header["tensors"].push_back({{"name", file.names[i]}, {"size", file.tensors[i].size()}});
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out.write(kModelMagic, 4);
  write_u32(out, static_cast<std::uint32_t>(text.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& t : file.tensors) write_as_f32(out, t);
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

ModelFile load_model_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  char magic[4];
  in.read(magic, 4);
  check_stream(in, "magic");
  if (std::memcmp(magic, kModelMagic, 4) != 0)
    throw std::runtime_error("malformed header: bad model magic in '" + path.string() + "'");
  const std::uint32_t len = read_u32(in, "header length");
  std::string text(len, '\0');
  in.read(text.data(), len);
  check_stream(in, "header");

  ModelFile file;
  file.header = nlohmann::json::parse(text);
  for (const auto& t : file.header.at("tensors")) {
    file.names.push_back(t.at("name").get<std::string>());
    std::vector<double> values(t.at("size").get<std::size_t>());
    read_into_f64(in, values, "tensor payload");
    file.tensors.push_back(std::move(values));
  }
  file.header.erase("tensors");
  return file;
}

std::filesystem::path sidecar_path(const std::filesystem::path& path) {
  return std::filesystem::path(path.string() + ".json");
}

void save_matrix_with_sidecar(const std::filesystem::path& path, std::span<const double> rowmajor,
                              std::size_t rows, std::size_t cols, nlohmann::json sidecar) {
  if (rowmajor.size() != rows * cols) throw std::invalid_argument("matrix size mismatch");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  write_as_f32(out, rowmajor);
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
  sidecar["rows"] = rows;
  sidecar["cols"] = cols;
  write_text_file(sidecar_path(path), sidecar.dump(2) + "\n");
}

MatrixWithSidecar load_matrix_with_sidecar(const std::filesystem::path& path) {
  MatrixWithSidecar m;
  m.sidecar = nlohmann::json::parse(read_text_file(sidecar_path(path)));
  m.rows = m.sidecar.at("rows").get<std::size_t>();
  m.cols = m.sidecar.at("cols").get<std::size_t>();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  m.values.resize(m.rows * m.cols);
  read_into_f64(in, m.values, "matrix payload");
  if (in.peek() != std::char_traits<char>::eof())
    throw std::runtime_error("trailing bytes in '" + path.string() + "'");
  return m;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace fvq::io
