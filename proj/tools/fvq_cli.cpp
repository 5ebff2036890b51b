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

// fvq: command-line front end for corpus generation, VAE training, encoding,
// SVM evaluation and full experiments. All configs are JSON; tables are CSV.

#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fvq/baselines.hpp"
#include "fvq/blob_io.hpp"
#include "fvq/experiment.hpp"
#include "fvq/preprocess.hpp"
#include "fvq/text_format.hpp"
#include "json.hpp"

namespace {

using fvq::StageError;
using nlohmann::json;

json read_json(const std::string& path) { return json::parse(fvq::io::read_text_file(path)); }

fvq::Corpus read_corpus(const std::string& path, bool normalize) {
  fvq::Corpus c = fvq::load_corpus(path);
  return normalize ? fvq::l2_normalize_corpus(c) : c;
}

json metrics_json(const fvq::Metrics& m) {
  return {{"top1", m.top1}, {"top3", m.top3}, {"map", m.map}};
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fisher Vector encoding of local descriptor sets with a VAE and classical baselines"};
  app.require_subcommand(1);

  std::string spec_path, train_out, test_out, corpus_path, config_path, out_path, model_path,
      fim_path, trace_path, encoder = "fvvae", features_path, values = "1,10,100,1000,10000,100000";
  bool no_normalize = false, raw_features = false;
  std::size_t components = 128, centers = 256, k = 0, frame_size = 0, epochs = 200;
  std::uint64_t seed = 0;
  double c_svm = 100.0, eps_floor = 1e-12;

  auto* gen = app.add_subcommand("gen", "Generate a synthetic train/test corpus from a JSON spec");
  gen->add_option("--spec", spec_path, "Synthetic spec JSON")->required();
  gen->add_option("--train", train_out, "Output train corpus")->required();
  gen->add_option("--test", test_out, "Output test corpus")->required();

  auto* train_vae = app.add_subcommand("train-vae", "Train the VAE on a corpus");
  train_vae->add_option("--corpus", corpus_path)->required();
  train_vae->add_option("--config", config_path, "VAE config JSON")->required();
  train_vae->add_option("--out", out_path, "Checkpoint output")->required();
  train_vae->add_option("--trace", trace_path, "Training trace CSV");
  train_vae->add_flag("--no-normalize", no_normalize, "Skip descriptor L2 normalization");

  auto* fit_gmm = app.add_subcommand("fit-gmm", "Fit a diagonal GMM on all descriptors");
  fit_gmm->add_option("--corpus", corpus_path)->required();
  fit_gmm->add_option("--components", components);
  fit_gmm->add_option("--seed", seed);
  fit_gmm->add_option("--out", out_path)->required();
  fit_gmm->add_flag("--no-normalize", no_normalize);

  auto* fit_vlad = app.add_subcommand("fit-vlad", "Fit a k-means codebook for VLAD");
  fit_vlad->add_option("--corpus", corpus_path)->required();
  fit_vlad->add_option("--centers", centers);
  fit_vlad->add_option("--seed", seed);
  fit_vlad->add_option("--out", out_path)->required();
  fit_vlad->add_flag("--no-normalize", no_normalize);

  auto* fim = app.add_subcommand("fim", "Estimate the diagonal Fisher information of a VAE");
  fim->add_option("--model", model_path)->required();
  fim->add_option("--corpus", corpus_path)->required();
  fim->add_option("--eps-floor", eps_floor);
  fim->add_option("--out", out_path)->required();
  fim->add_flag("--no-normalize", no_normalize);

  auto* encode = app.add_subcommand("encode", "Encode every set of a corpus");
  encode->add_option("--encoder", encoder, "fvvae|gmmfv|vlad|bp|ave|concat");
  encode->add_option("--model", model_path, "Checkpoint / GMM / VLAD model");
  encode->add_option("--fim", fim_path, "FIM export (fvvae)");
  encode->add_option("--corpus", corpus_path)->required();
  encode->add_option("--out", out_path)->required();
  encode->add_flag("--raw", raw_features, "Skip signed sqrt + L2 normalization");
  encode->add_flag("--no-normalize", no_normalize);

  auto* svm_train = app.add_subcommand("svm-train", "Train one-vs-all linear SVMs");
  svm_train->add_option("--features", features_path)->required();
  svm_train->add_option("--c", c_svm);
  svm_train->add_option("--epochs", epochs);
  svm_train->add_option("--seed", seed);
  svm_train->add_option("--out", out_path)->required();

  auto* svm_eval = app.add_subcommand("svm-eval", "Evaluate an SVM on encoded features");
  svm_eval->add_option("--model", model_path)->required();
  svm_eval->add_option("--features", features_path)->required();
  svm_eval->add_option("--out", out_path, "Metrics JSON");

  auto* run = app.add_subcommand("run", "Run a full experiment from a JSON config");
  run->add_option("--config", config_path)->required();

  auto* sweep = app.add_subcommand("sweep-lambda3", "Sweep the classification loss weight");
  sweep->add_option("--config", config_path)->required();
  sweep->add_option("--values", values, "Comma-separated lambda3 values");
  sweep->add_option("--out", out_path, "CSV output")->required();

  auto* attention = app.add_subcommand("attention", "Per-descriptor attention values as CSV");
  attention->add_option("--model", model_path)->required();
  attention->add_option("--fim", fim_path)->required();
  attention->add_option("--corpus", corpus_path)->required();
  attention->add_option("--out", out_path)->required();
  attention->add_option("--frame-size", frame_size, "Descriptors per frame for frame-level sums");
  attention->add_flag("--no-normalize", no_normalize);

  auto* pca = app.add_subcommand("pca", "PCA-compress encoded features");
  pca->add_option("--features", features_path)->required();
  pca->add_option("--k", k)->required();
  pca->add_option("--out", out_path)->required();

  CLI11_PARSE(app, argc, argv);

  std::string stage = app.get_subcommands().front()->get_name();
  try {
    if (*gen) {
      const json j = read_json(spec_path);
      const fvq::SyntheticSpec spec = fvq::synthetic_spec_from_json(j, fvq::SyntheticSpec{}.seed);
      const auto [train, test] = fvq::generate_synthetic(spec);
      fvq::save_corpus(train, train_out);
      fvq::save_corpus(test, test_out);
    } else if (*train_vae) {
      const fvq::Corpus corpus = read_corpus(corpus_path, !no_normalize);
      fvq::VaeConfig cfg = read_json(config_path).get<fvq::VaeConfig>();
      cfg.dim = corpus.dim;
      cfg.num_classes = corpus.num_classes;
      const fvq::TrainResult result = fvq::train_vae(corpus, cfg);
      fvq::save_checkpoint(out_path, {result.params, cfg, cfg.max_batches});
      if (!trace_path.empty()) fvq::io::write_text_file(trace_path, result.trace.to_csv());
    } else if (*fit_gmm) {
      const fvq::Corpus corpus = read_corpus(corpus_path, !no_normalize);
      fvq::save_gmm(out_path, fvq::fit_gmm(fvq::stack_descriptors(corpus), components, seed));
    } else if (*fit_vlad) {
      const fvq::Corpus corpus = read_corpus(corpus_path, !no_normalize);
      fvq::save_vlad(out_path, fvq::fit_vlad(fvq::stack_descriptors(corpus), centers, seed));
    } else if (*fim) {
      const fvq::Checkpoint ckpt = fvq::load_checkpoint(model_path);
      const fvq::Corpus corpus = read_corpus(corpus_path, !no_normalize);
      fvq::save_fim(out_path, fvq::estimate_fim(ckpt.params, corpus, eps_floor), ckpt.params.dim(),
                    ckpt.params.latent_dim());
    } else if (*encode) {
      const fvq::Corpus corpus = read_corpus(corpus_path, !no_normalize);
      fvq::FittedEncoder enc;
      enc.kind = fvq::parse_encoder(encoder);
      json meta = {{"encoder", encoder}, {"d", corpus.dim}, {"d_z", nullptr}};
      if (enc.kind == fvq::EncoderKind::fvvae) {
        if (model_path.empty() || fim_path.empty())
          throw std::invalid_argument("fvvae needs --model and --fim");
        enc.vae = fvq::load_checkpoint(model_path).params;
        enc.fim = fvq::load_fim(fim_path);
        meta["d_z"] = enc.vae->latent_dim();
      } else if (enc.kind == fvq::EncoderKind::gmmfv) {
        enc.gmm = fvq::load_gmm(model_path);
      } else if (enc.kind == fvq::EncoderKind::vlad) {
        enc.vlad = fvq::load_vlad(model_path);
      }
      fvq::save_features(out_path, fvq::encode_corpus(enc, corpus, !raw_features), meta);
    } else if (*svm_train) {
      const fvq::EncodedCorpus feats = fvq::load_features(features_path);
      fvq::save_svm(out_path, fvq::train_svm(feats.features, feats.labels, feats.num_classes,
                                             {c_svm, epochs, seed}));
    } else if (*svm_eval) {
      const fvq::EncodedCorpus feats = fvq::load_features(features_path);
      const fvq::Metrics m = fvq::evaluate(fvq::load_svm(model_path), feats.features, feats.labels);
      const std::string text = metrics_json(m).dump(2) + "\n";
      if (out_path.empty())
        std::cout << text;
      else
        fvq::io::write_text_file(out_path, text);
    } else if (*run) {
      const fvq::ExperimentConfig cfg = fvq::experiment_config_from_json(read_json(config_path));
      const fvq::ExperimentReport report = fvq::run_experiment(cfg);
      std::cout << report.json.dump(2) << "\n";
    } else if (*sweep) {
      const fvq::ExperimentConfig cfg = fvq::experiment_config_from_json(read_json(config_path));
      fvq::io::write_text_file(out_path, fvq::sweep_to_csv(fvq::sweep_lambda3(cfg, parse_list(values))));
    } else if (*attention) {
      const fvq::VaeParams params = fvq::load_checkpoint(model_path).params;
      const fvq::FimDiagonal f = fvq::load_fim(fim_path);
      const fvq::Corpus corpus = read_corpus(corpus_path, !no_normalize);
      std::string csv = "set_id,descriptor_index,value\n";
      std::string frames = "set_id,frame_index,value\n";
      for (const auto& set : corpus.sets) {
        const std::vector<double> vals = fvq::attention_values(params, f, set);
        for (std::size_t t = 0; t < vals.size(); ++t)
          csv += set.set_id + ',' + std::to_string(t) + ',' + fvq::format_double(vals[t]) + '\n';
        if (frame_size > 0)
          for (std::size_t start = 0, frame = 0; start < vals.size(); start += frame_size, ++frame) {
            double sum = 0.0;
            for (std::size_t t = start; t < std::min(vals.size(), start + frame_size); ++t) sum += vals[t];
            frames += set.set_id + ',' + std::to_string(frame) + ',' + fvq::format_double(sum) + '\n';
          }
      }
      fvq::io::write_text_file(out_path, csv);
      if (frame_size > 0) fvq::io::write_text_file(out_path + ".frames.csv", frames);
    } else if (*pca) {
      fvq::EncodedCorpus feats = fvq::load_features(features_path);
      const fvq::PcaModel model = fvq::pca_compress(feats.features, k);
      feats.features = model.projected;
      json meta = {{"encoder", "pca"}, {"source", features_path}};
      meta["explained_variance"] =
          std::vector<double>(model.explained_variance.data(),
                              model.explained_variance.data() + model.explained_variance.size());
      fvq::save_features(out_path, feats, meta);
    }
  } catch (const StageError& e) {
    std::cerr << "fvq: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "fvq: [" << stage << "] " << e.what() << "\n";
    return 1;
  }
  return 0;
}
