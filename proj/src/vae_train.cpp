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

#include <stdexcept>
#include <utility>

#include "fvq/blob_io.hpp"
#include "fvq/text_format.hpp"
#include "fvq/vae.hpp"

namespace fvq {

namespace {

void add_scaled(VaeParams& acc, const VaeParams& g, double scale) {
  auto a = acc.tensors();
  const auto b = g.tensors();
  for (std::size_t t = 0; t < VaeParams::kTensorCount; ++t)
    for (std::size_t i = 0; i < a[t].size(); ++i) a[t][i] += scale * b[t][i];
}

}  // namespace

std::string TrainingTrace::to_csv() const {
  std::string out = "batch,rec,reg,cls,total,lower_bound\n";
  for (std::size_t b = 0; b < batches.size(); ++b) {
    const auto& l = batches[b];
    out += std::to_string(b) + ',' + format_double(l.rec) + ',' + format_double(l.reg) + ',' +
           format_double(l.cls) + ',' + format_double(l.total) + ',' +
           format_double(l.lower_bound) + '\n';
  }
  return out;
}

double TrainingTrace::mean_total(std::size_t begin, std::size_t end) const {
  if (begin >= end || end > batches.size()) throw std::out_of_range("bad trace window");
  double sum = 0.0;
  for (std::size_t b = begin; b < end; ++b) sum += batches[b].total;
  return sum / static_cast<double>(end - begin);
}

TrainResult train_vae(const Corpus& corpus, const VaeConfig& cfg) {
  cfg.validate();
  if (corpus.sets.empty()) throw std::invalid_argument("cannot train on an empty corpus");
  if (corpus.dim != cfg.dim)
    throw std::invalid_argument("corpus dimension " + std::to_string(corpus.dim) +
                                " does not match VAE dimension " + std::to_string(cfg.dim));

  std::vector<std::pair<std::uint32_t, std::uint32_t>> pool;
  pool.reserve(corpus.total_descriptors());
  for (std::size_t s = 0; s < corpus.sets.size(); ++s) {
    if (corpus.sets[s].label >= cfg.num_classes)
      throw std::invalid_argument("corpus label exceeds VAE num_classes");
    for (std::size_t t = 0; t < corpus.sets[s].size(); ++t)
      pool.emplace_back(static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(t));
  }

  Rng rng(cfg.seed);
  TrainResult result;
  result.params = VaeParams::initialize(cfg, rng);
  result.initial = result.params;
  result.trace.batches.reserve(cfg.max_batches);

  VaeParams& params = result.params;
  AdaDeltaState state = AdaDeltaState::fresh(params);
  const double inv_batch = 1.0 / static_cast<double>(cfg.batch_size);

  for (std::size_t b = 0; b < cfg.max_batches; ++b) {
    VaeParams grad_sum =
        VaeParams::zeros(params.dim(), params.hidden(), params.latent_dim(), params.num_classes());
    LossBreakdown batch_loss;
    for (std::size_t i = 0; i < cfg.batch_size; ++i) {
      const auto [s, t] = pool[rng.index(pool.size())];
      const DescriptorSet& set = corpus.sets[s];
      const SampleNoise noise = draw_noise(cfg, rng);
      const LossAndGrads lg = loss_and_grads(params, set.row(t), set.label, cfg, noise);
      add_scaled(grad_sum, lg.grads, inv_batch);
      batch_loss.rec += lg.loss.rec * inv_batch;
      batch_loss.reg += lg.loss.reg * inv_batch;
      batch_loss.cls += lg.loss.cls * inv_batch;
      batch_loss.total += lg.loss.total * inv_batch;
      batch_loss.lower_bound += lg.loss.lower_bound * inv_batch;
    }
    adadelta_step(params, grad_sum, state);
    result.trace.batches.push_back(batch_loss);
  }
  return result;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  io::ModelFile file;
  file.header = {{"format", "fvq-vae-checkpoint"},
                 {"config", ckpt.cfg},
                 {"seed", ckpt.cfg.seed},
                 {"batch_index", ckpt.batch_index},
                 {"shapes",
                  {{"dim", ckpt.params.dim()},
                   {"hidden", ckpt.params.hidden()},
                   {"latent_dim", ckpt.params.latent_dim()},
                   {"num_classes", ckpt.params.num_classes()}}}};
  const auto views = ckpt.params.tensors();
  for (std::size_t i = 0; i < VaeParams::kTensorCount; ++i)
    file.add(std::string(VaeParams::tensor_names()[i]), views[i]);
  io::save_model_file(file, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const io::ModelFile file = io::load_model_file(path);
  if (file.header.value("format", "") != "fvq-vae-checkpoint")
    throw std::runtime_error("'" + path.string() + "' is not a VAE checkpoint");
  Checkpoint ckpt;
  ckpt.cfg = file.header.at("config").get<VaeConfig>();
  ckpt.batch_index = file.header.at("batch_index").get<std::size_t>();
  const auto& shapes = file.header.at("shapes");
  ckpt.params = VaeParams::zeros(shapes.at("dim"), shapes.at("hidden"), shapes.at("latent_dim"),
                                 shapes.at("num_classes"));
  auto views = ckpt.params.tensors();
  for (std::size_t i = 0; i < VaeParams::kTensorCount; ++i) {
    const auto& values = file.get(std::string(VaeParams::tensor_names()[i]));
    if (values.size() != views[i].size())
      throw std::runtime_error("checkpoint tensor size mismatch for " +
                               std::string(VaeParams::tensor_names()[i]));
    std::copy(values.begin(), values.end(), views[i].begin());
  }
  return ckpt;
}

}  // namespace fvq
