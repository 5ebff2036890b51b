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

// End-to-end experiments: data -> encoder fit -> encode -> signed sqrt + L2
// -> optional PCA -> one-vs-all SVM -> metrics.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fvq/baselines.hpp"
#include "fvq/descriptors.hpp"
#include "fvq/fvcodec.hpp"
#include "fvq/metrics.hpp"
#include "fvq/svm.hpp"
#include "fvq/vae.hpp"
#include "json.hpp"

namespace fvq {

// Error annotated with the pipeline stage that raised it.
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::string& message)
      : std::runtime_error("[" + stage + "] " + message), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

enum class EncoderKind { fvvae, gmmfv, vlad, bp, ave, concat };

EncoderKind parse_encoder(const std::string& name);
std::string encoder_name(EncoderKind kind);

// A fitted encoder; only the members relevant to `kind` are set.
struct FittedEncoder {
  EncoderKind kind = EncoderKind::ave;
  std::optional<VaeParams> vae;
  std::optional<FimDiagonal> fim;
  std::optional<GmmModel> gmm;
  std::optional<VladCodebook> vlad;

  // Unnormalized encoding of one set.
  FisherVector encode(const DescriptorSet& set) const;
};

struct EncodedCorpus {
  RowMatrixd features;  // N x M
  std::vector<std::uint32_t> labels;
  std::vector<std::string> set_ids;
  std::uint32_t num_classes = 0;
  FvFlags flags;
};

// Encodes every set; with `normalize`, applies signed sqrt + L2 per row.
EncodedCorpus encode_corpus(const FittedEncoder& encoder, const Corpus& corpus, bool normalize);

void save_features(const std::filesystem::path& path, const EncodedCorpus& encoded,
                   nlohmann::json meta);
EncodedCorpus load_features(const std::filesystem::path& path);

struct ExperimentConfig {
  EncoderKind encoder = EncoderKind::fvvae;
  std::uint64_t seed = 0;

  std::optional<SyntheticSpec> synthetic;
  std::filesystem::path train_path;
  std::filesystem::path test_path;
  bool l2_normalize_descriptors = true;

  VaeConfig vae;  // dim and num_classes are taken from the corpus
  double fim_eps_floor = 1e-12;
  std::size_t gmm_components = 128;
  std::size_t vlad_centers = 256;
  SvmOptions svm;
  std::size_t pca_dim = 0;  // 0 disables compression
  std::vector<std::string> metrics{"top1", "top3", "map"};

  std::filesystem::path report_path;  // empty: no report file
  std::filesystem::path trace_path;   // empty: no training trace file

  nlohmann::json raw;  // the JSON this config was parsed from, echoed in reports

  void validate() const;
};

ExperimentConfig experiment_config_from_json(const nlohmann::json& j);

// Missing keys take SyntheticSpec defaults; a missing "seed" takes `fallback_seed`.
SyntheticSpec synthetic_spec_from_json(const nlohmann::json& j, std::uint64_t fallback_seed);

struct ExperimentReport {
  nlohmann::json json;  // config echo, metrics, fv_dim, timings
  Metrics metrics;
  std::size_t fv_dim = 0;
  TrainingTrace trace;  // populated for fvvae
};

// Loads or synthesizes data; returns (train, test), L2-normalized per config.
std::pair<Corpus, Corpus> prepare_data(const ExperimentConfig& cfg);

FittedEncoder fit_encoder(const ExperimentConfig& cfg, const Corpus& train,
                          TrainingTrace* trace = nullptr);

ExperimentReport run_experiment(const ExperimentConfig& cfg);

struct SweepRow {
  double lambda3 = 0.0;
  Metrics metrics;
};
std::vector<SweepRow> sweep_lambda3(const ExperimentConfig& cfg, const std::vector<double>& values);
std::string sweep_to_csv(const std::vector<SweepRow>& rows);

// Report JSON with the "timings" member removed, for reproducibility checks.
nlohmann::json strip_timings(nlohmann::json report);

// Derived per-stage seed.
std::uint64_t stage_seed(std::uint64_t master, std::uint64_t stage);

}  // namespace fvq
