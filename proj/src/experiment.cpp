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

#include "fvq/experiment.hpp"

#include <chrono>
#include <functional>

#include "fvq/blob_io.hpp"
#include "fvq/preprocess.hpp"
#include "fvq/text_format.hpp"

namespace fvq {

namespace {

using Clock = std::chrono::steady_clock;

// Runs `fn`, rethrowing any failure as a StageError tagged with `stage`.
template <class Fn>
auto in_stage(const std::string& stage, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(stage, e.what());
  }
}

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

}  // namespace

SyntheticSpec synthetic_spec_from_json(const nlohmann::json& j, std::uint64_t fallback_seed) {
  SyntheticSpec s;
  s.num_classes = j.value("num_classes", s.num_classes);
  s.sets_per_class = j.value("sets_per_class", s.sets_per_class);
  s.test_sets_per_class = j.value("test_sets_per_class", s.test_sets_per_class);
  s.descriptors_per_set = j.value("descriptors_per_set", s.descriptors_per_set);
  s.dim = j.value("dim", s.dim);
  s.components_per_class = j.value("components_per_class", s.components_per_class);
  s.separation = j.value("separation", s.separation);
  s.noise_sigma = j.value("noise_sigma", s.noise_sigma);
  s.offset = j.value("offset", s.offset);
  s.seed = j.value("seed", fallback_seed);
  return s;
}

std::uint64_t stage_seed(std::uint64_t master, std::uint64_t stage) {
  // splitmix64 finalizer
  std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (stage + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

EncoderKind parse_encoder(const std::string& name) {
  if (name == "fvvae") return EncoderKind::fvvae;
  if (name == "gmmfv") return EncoderKind::gmmfv;
  if (name == "vlad") return EncoderKind::vlad;
  if (name == "bp") return EncoderKind::bp;
  if (name == "ave") return EncoderKind::ave;
  if (name == "concat") return EncoderKind::concat;
  throw std::invalid_argument("unknown encoder '" + name + "'");
}

std::string encoder_name(EncoderKind kind) {
  switch (kind) {
    case EncoderKind::fvvae: return "fvvae";
    case EncoderKind::gmmfv: return "gmmfv";
    case EncoderKind::vlad: return "vlad";
    case EncoderKind::bp: return "bp";
    case EncoderKind::ave: return "ave";
    case EncoderKind::concat: return "concat";
  }
  return "unknown";
}

FisherVector FittedEncoder::encode(const DescriptorSet& set) const {
  switch (kind) {
    case EncoderKind::fvvae:
      if (!vae || !fim) throw std::invalid_argument("fvvae encoder needs a VAE and a FIM");
      return extract_fv(*vae, *fim, set);
    case EncoderKind::gmmfv:
      if (!gmm) throw std::invalid_argument("gmmfv encoder needs a GMM");
      return gmm_fv_encode(*gmm, set);
    case EncoderKind::vlad:
      if (!vlad) throw std::invalid_argument("vlad encoder needs a codebook");
      return FisherVector{vlad_encode(*vlad, set), {}};
    case EncoderKind::bp: return FisherVector{bilinear_encode(set), {}};
    case EncoderKind::ave: return FisherVector{average_encode(set), {}};
    case EncoderKind::concat: return FisherVector{concat_encode(set), {}};
  }
  throw std::logic_error("unhandled encoder");
}

EncodedCorpus encode_corpus(const FittedEncoder& encoder, const Corpus& corpus, bool normalize) {
  EncodedCorpus out;
  out.num_classes = corpus.num_classes;
  for (std::size_t i = 0; i < corpus.sets.size(); ++i) {
    const DescriptorSet& set = corpus.sets[i];
    FisherVector fv = encoder.encode(set);
    if (normalize) fv = power_l2_normalize(fv);
    if (i == 0) {
      out.features.resize(static_cast<Eigen::Index>(corpus.sets.size()), fv.values.size());
      out.flags = fv.flags;
    } else if (fv.values.size() != out.features.cols()) {
      throw std::invalid_argument("set '" + set.set_id +
                                  "' encodes to a different length (concat needs equal T)");
    }
    out.features.row(static_cast<Eigen::Index>(i)) = fv.values.transpose();
    out.labels.push_back(set.label);
    out.set_ids.push_back(set.set_id);
  }
  return out;
}

void save_features(const std::filesystem::path& path, const EncodedCorpus& encoded,
                   nlohmann::json meta) {
  meta["kind"] = "features";
  meta["M"] = encoded.features.cols();
  meta["num_classes"] = encoded.num_classes;
  meta["flags"] = {{"fim_applied", encoded.flags.fim_applied},
                   {"power_applied", encoded.flags.power_applied},
                   {"l2_applied", encoded.flags.l2_applied}};
  meta["set_ids"] = encoded.set_ids;
  meta["labels"] = encoded.labels;
  io::save_matrix_with_sidecar(
      path, std::span<const double>(encoded.features.data(), encoded.features.size()),
      static_cast<std::size_t>(encoded.features.rows()),
      static_cast<std::size_t>(encoded.features.cols()), std::move(meta));
}

EncodedCorpus load_features(const std::filesystem::path& path) {
  const auto m = io::load_matrix_with_sidecar(path);
  if (m.sidecar.value("kind", "") != "features") throw std::runtime_error("not a feature export");
  EncodedCorpus out;
  out.features = Eigen::Map<const RowMatrixd>(m.values.data(), static_cast<Eigen::Index>(m.rows),
                                              static_cast<Eigen::Index>(m.cols));
  out.labels = m.sidecar.at("labels").get<std::vector<std::uint32_t>>();
  out.set_ids = m.sidecar.at("set_ids").get<std::vector<std::string>>();
  out.num_classes = m.sidecar.at("num_classes").get<std::uint32_t>();
  const auto& f = m.sidecar.at("flags");
  out.flags = {f.at("fim_applied"), f.at("power_applied"), f.at("l2_applied")};
  if (out.labels.size() != m.rows) throw std::runtime_error("sidecar label count mismatch");
  return out;
}

void ExperimentConfig::validate() const {
  if (!synthetic && (train_path.empty() || test_path.empty()))
    throw std::invalid_argument("config needs data.synthetic or data.train + data.test");
  if (synthetic) synthetic->validate();
  if (encoder == EncoderKind::gmmfv && gmm_components == 0)
    throw std::invalid_argument("gmm.components must be >= 1");
  if (encoder == EncoderKind::vlad && vlad_centers == 0)
    throw std::invalid_argument("vlad.centers must be >= 1");
  for (const auto& m : metrics)
    if (m != "top1" && m != "top3" && m != "map")
      throw std::invalid_argument("unknown metric '" + m + "'");
}

ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
  ExperimentConfig cfg;
  cfg.raw = j;
  cfg.encoder = parse_encoder(j.value("encoder", std::string("fvvae")));
  cfg.seed = j.value("seed", std::uint64_t{0});

  const nlohmann::json data = j.value("data", nlohmann::json::object());
  if (data.contains("synthetic"))
    cfg.synthetic = synthetic_spec_from_json(data.at("synthetic"), cfg.seed);
  cfg.train_path = data.value("train", std::string());
  cfg.test_path = data.value("test", std::string());
  cfg.l2_normalize_descriptors = j.value("l2_normalize", true);

  const nlohmann::json vae = j.value("vae", nlohmann::json::object());
  cfg.vae = vae.get<VaeConfig>();
  if (!vae.contains("seed")) cfg.vae.seed = stage_seed(cfg.seed, 1);
  cfg.fim_eps_floor = j.value("fim", nlohmann::json::object()).value("eps_floor", 1e-12);
  cfg.gmm_components =
      j.value("gmm", nlohmann::json::object()).value("components", cfg.gmm_components);
  cfg.vlad_centers = j.value("vlad", nlohmann::json::object()).value("centers", cfg.vlad_centers);

  const nlohmann::json svm = j.value("svm", nlohmann::json::object());
  cfg.svm.c_svm = svm.value("c_svm", cfg.svm.c_svm);
  cfg.svm.epochs = svm.value("epochs", cfg.svm.epochs);
  cfg.svm.seed = svm.value("seed", stage_seed(cfg.seed, 3));
  cfg.pca_dim = j.value("pca_dim", std::size_t{0});
  if (j.contains("metrics")) cfg.metrics = j.at("metrics").get<std::vector<std::string>>();

  const nlohmann::json output = j.value("output", nlohmann::json::object());
  cfg.report_path = output.value("report", std::string());
  cfg.trace_path = output.value("trace", std::string());
  cfg.validate();
  return cfg;
}

std::pair<Corpus, Corpus> prepare_data(const ExperimentConfig& cfg) {
  Corpus train, test;
  if (cfg.synthetic) {
    std::tie(train, test) = generate_synthetic(*cfg.synthetic);
  } else {
    train = load_corpus(cfg.train_path, Split::train);
    test = load_corpus(cfg.test_path, Split::test);
  }
  if (train.dim != test.dim) throw std::invalid_argument("train/test dimension mismatch");
  if (train.sets.empty() || test.sets.empty()) throw std::invalid_argument("empty train or test split");
  if (cfg.l2_normalize_descriptors) {
    train = l2_normalize_corpus(train);
    test = l2_normalize_corpus(test);
  }
  return {std::move(train), std::move(test)};
}

FittedEncoder fit_encoder(const ExperimentConfig& cfg, const Corpus& train, TrainingTrace* trace) {
  FittedEncoder enc;
  enc.kind = cfg.encoder;
  switch (cfg.encoder) {
    case EncoderKind::fvvae: {
      VaeConfig vcfg = cfg.vae;
      vcfg.dim = train.dim;
      vcfg.num_classes = train.num_classes;
      TrainResult trained = train_vae(train, vcfg);
      enc.fim = estimate_fim(trained.params, train, cfg.fim_eps_floor);
      enc.vae = std::move(trained.params);
      if (trace) *trace = std::move(trained.trace);
      break;
    }
    case EncoderKind::gmmfv:
      enc.gmm = fit_gmm(stack_descriptors(train), cfg.gmm_components, stage_seed(cfg.seed, 2));
      break;
    case EncoderKind::vlad:
      enc.vlad = fit_vlad(stack_descriptors(train), cfg.vlad_centers, stage_seed(cfg.seed, 2));
      break;
    default:
      break;
  }
  return enc;
}

ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  ExperimentReport report;
  nlohmann::json timings = nlohmann::json::object();

  auto start = Clock::now();
  auto [train, test] = in_stage("data", [&] {
    cfg.validate();
    return prepare_data(cfg);
  });
  timings["data"] = seconds_since(start);

  start = Clock::now();
  const FittedEncoder encoder = in_stage("fit", [&] { return fit_encoder(cfg, train, &report.trace); });
  timings["fit"] = seconds_since(start);

  start = Clock::now();
  EncodedCorpus train_feats = in_stage("encode", [&] { return encode_corpus(encoder, train, true); });
  EncodedCorpus test_feats = in_stage("encode", [&] { return encode_corpus(encoder, test, true); });
  report.fv_dim = static_cast<std::size_t>(train_feats.features.cols());
  timings["encode"] = seconds_since(start);

  if (cfg.pca_dim > 0) {
    start = Clock::now();
    in_stage("pca", [&] {
      const PcaModel pca = pca_compress(train_feats.features, cfg.pca_dim);
      train_feats.features = pca.projected;
      RowMatrixd projected(test_feats.features.rows(), static_cast<Eigen::Index>(cfg.pca_dim));
      for (Eigen::Index i = 0; i < projected.rows(); ++i)
        projected.row(i) = pca.project(test_feats.features.row(i).transpose()).transpose();
      test_feats.features = std::move(projected);
    });
    timings["pca"] = seconds_since(start);
  }

  start = Clock::now();
  const SvmModel svm = in_stage("svm", [&] {
    return train_svm(train_feats.features, train_feats.labels, train.num_classes, cfg.svm);
  });
  timings["svm"] = seconds_since(start);

  report.metrics = in_stage("evaluate", [&] { return evaluate(svm, test_feats.features, test_feats.labels); });

  nlohmann::json metrics = nlohmann::json::object();
  for (const auto& name : cfg.metrics) {
    if (name == "top1") metrics["top1"] = report.metrics.top1;
    if (name == "top3") metrics["top3"] = report.metrics.top3;
    if (name == "map") metrics["map"] = report.metrics.map;
  }
  report.json = {{"config", cfg.raw},
                 {"encoder", encoder_name(cfg.encoder)},
                 {"fv_dim", report.fv_dim},
                 {"feature_dim", train_feats.features.cols()},
                 {"num_train_sets", train.sets.size()},
                 {"num_test_sets", test.sets.size()},
                 {"metrics", metrics},
                 {"timings", timings}};
  if (!report.trace.batches.empty()) {
    const std::size_t n = report.trace.batches.size();
    const std::size_t window = std::max<std::size_t>(1, n / 10);
    report.json["training"] = {{"batches", n},
                               {"first_window_mean_total", report.trace.mean_total(0, window)},
                               {"last_window_mean_total", report.trace.mean_total(n - window, n)}};
  }

  in_stage("report", [&] {
    if (!cfg.report_path.empty()) io::write_text_file(cfg.report_path, report.json.dump(2) + "\n");
    if (!cfg.trace_path.empty() && !report.trace.batches.empty())
      io::write_text_file(cfg.trace_path, report.trace.to_csv());
  });
  return report;
}

std::vector<SweepRow> sweep_lambda3(const ExperimentConfig& cfg, const std::vector<double>& values) {
  if (cfg.encoder != EncoderKind::fvvae)
    throw StageError("sweep", "lambda3 sweep requires the fvvae encoder");
  std::vector<SweepRow> rows;
  for (double lambda3 : values) {
    ExperimentConfig run = cfg;
    run.vae.lambda3 = lambda3;
    run.report_path.clear();
    run.trace_path.clear();
    rows.push_back({lambda3, run_experiment(run).metrics});
  }
  return rows;
}

std::string sweep_to_csv(const std::vector<SweepRow>& rows) {
  std::string out = "lambda3,top1,top3,map\n";
  for (const auto& r : rows)
    out += format_double(r.lambda3) + ',' + format_double(r.metrics.top1) + ',' +
           format_double(r.metrics.top3) + ',' + format_double(r.metrics.map) + '\n';
  return out;
}

nlohmann::json strip_timings(nlohmann::json report) {
  report.erase("timings");
  return report;
}

}  // namespace fvq
