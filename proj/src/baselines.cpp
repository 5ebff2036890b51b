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

#include "fvq/baselines.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "fvq/blob_io.hpp"
#include "fvq/kmeans.hpp"

namespace fvq {

namespace {

const double kLog2Pi = std::log(2.0 * std::numbers::pi);

// log(w_k) + log N(x; mu_k, diag(var_k)) for every component.
Eigen::VectorXd component_log_densities(const GmmModel& m, const Eigen::VectorXd& x) {
  const Eigen::Index k = m.means.rows();
  Eigen::VectorXd out(k);
  for (Eigen::Index c = 0; c < k; ++c) {
    double acc = std::log(m.weights[c]);
    for (Eigen::Index j = 0; j < x.size(); ++j) {
      const double var = m.variances(c, j);
      const double diff = x[j] - m.means(c, j);
      acc -= 0.5 * (kLog2Pi + std::log(var) + diff * diff / var);
    }
    out[c] = acc;
  }
  return out;
}

double log_sum_exp(const Eigen::VectorXd& v) {
  const double peak = v.maxCoeff();
  return peak + std::log((v.array() - peak).exp().sum());
}

void check_dim(std::size_t expected, const DescriptorSet& set) {
  if (set.dim() != expected)
    throw std::invalid_argument("dimension mismatch: set '" + set.set_id + "' has d=" +
                                std::to_string(set.dim()) + ", model expects " +
                                std::to_string(expected));
}

}  // namespace

RowMatrixd stack_descriptors(const Corpus& corpus) {
  RowMatrixd out(static_cast<Eigen::Index>(corpus.total_descriptors()), corpus.dim);
  Eigen::Index row = 0;
  for (const auto& set : corpus.sets) {
    out.middleRows(row, set.descriptors.rows()) = set.descriptors.cast<double>();
    row += set.descriptors.rows();
  }
  return out;
}

Eigen::VectorXd GmmModel::responsibilities(const Eigen::VectorXd& x) const {
  const Eigen::VectorXd logp = component_log_densities(*this, x);
  return (logp.array() - log_sum_exp(logp)).exp().matrix();
}

double GmmModel::log_likelihood(const Eigen::VectorXd& x) const {
  return log_sum_exp(component_log_densities(*this, x));
}

GmmModel fit_gmm(const RowMatrixd& data, std::size_t k, std::uint64_t seed,
                 const GmmFitOptions& options, std::vector<double>* ll_trace) {
  const Eigen::Index n = data.rows(), d = data.cols();
  const auto kk = static_cast<Eigen::Index>(k);
  GmmModel model;
  model.means = kmeanspp_seed(data, k, seed);

  const Eigen::RowVectorXd global_mean = data.colwise().mean();
  const Eigen::RowVectorXd global_var =
      (data.rowwise() - global_mean).array().square().colwise().mean();
  const double floor = std::max(options.variance_floor_scale * global_var.mean(), 1e-300);

  model.weights = Eigen::VectorXd::Constant(kk, 1.0 / static_cast<double>(k));
  model.variances = global_var.cwiseMax(floor).replicate(kk, 1);

  RowMatrixd resp(n, kk);
  double prev_ll = 0.0;
  for (std::size_t it = 0; it < options.max_iterations; ++it) {
    double ll = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::VectorXd logp = component_log_densities(model, data.row(i).transpose());
      const double lse = log_sum_exp(logp);
      ll += lse;
      resp.row(i) = (logp.array() - lse).exp().matrix().transpose();
    }
    if (ll_trace) ll_trace->push_back(ll);
    if (it > 0 && ll - prev_ll < options.relative_tolerance * std::abs(prev_ll)) break;
    prev_ll = ll;

    const Eigen::VectorXd mass = resp.colwise().sum().transpose();
    for (Eigen::Index c = 0; c < kk; ++c) {
      if (!(mass[c] > 1e-10)) continue;  // starved component keeps its parameters
      const Eigen::RowVectorXd mean = resp.col(c).transpose() * data / mass[c];
      Eigen::RowVectorXd var = Eigen::RowVectorXd::Zero(d);
      for (Eigen::Index i = 0; i < n; ++i)
        var += resp(i, c) * (data.row(i) - mean).array().square().matrix();
      model.means.row(c) = mean;
      model.variances.row(c) = (var / mass[c]).cwiseMax(floor);
    }
    model.weights = mass.cwiseMax(1e-10);
    model.weights /= model.weights.sum();
  }
  return model;
}

FisherVector gmm_fv_encode(const GmmModel& model, const DescriptorSet& set) {
  check_dim(model.dim(), set);
  const Eigen::Index k = model.means.rows(), d = model.means.cols();
  FisherVector fv;
  fv.values = Eigen::VectorXd::Zero(2 * k * d);
  const Eigen::VectorXd inv_sqrt_w = model.weights.cwiseSqrt().cwiseInverse();
  const RowMatrixd inv_sigma = model.variances.cwiseSqrt().cwiseInverse();
  for (std::size_t t = 0; t < set.size(); ++t) {
    const Eigen::VectorXd x = set.row(t);
    const Eigen::VectorXd gamma = model.responsibilities(x);
    for (Eigen::Index c = 0; c < k; ++c) {
      const Eigen::ArrayXd u =
          (x - model.means.row(c).transpose()).array() * inv_sigma.row(c).transpose().array();
      fv.values.segment(2 * c * d, d) += (gamma[c] * inv_sqrt_w[c] * u).matrix();
      fv.values.segment(2 * c * d + d, d) +=
          (gamma[c] * inv_sqrt_w[c] / std::numbers::sqrt2 * (u.square() - 1.0)).matrix();
    }
  }
  return fv;
}

VladCodebook fit_vlad(const RowMatrixd& data, std::size_t k, std::uint64_t seed,
                      std::vector<double>* wcss_trace) {
  KMeansResult km = lloyd(data, kmeanspp_seed(data, k, seed));
  if (wcss_trace) *wcss_trace = km.wcss_trace;
  return VladCodebook{std::move(km.centroids)};
}

Eigen::VectorXd vlad_encode(const VladCodebook& codebook, const DescriptorSet& set) {
  check_dim(codebook.dim(), set);
  const Eigen::Index d = codebook.centroids.cols();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(codebook.centroids.rows() * d);
  for (std::size_t t = 0; t < set.size(); ++t) {
    const Eigen::VectorXd x = set.row(t);
    const auto c = static_cast<Eigen::Index>(nearest_centroid(codebook.centroids, x));
    out.segment(c * d, d) += x - codebook.centroids.row(c).transpose();
  }
  return out;
}

Eigen::VectorXd bilinear_encode(const DescriptorSet& set) {
  if (set.size() == 0) throw std::invalid_argument("bilinear pooling needs a nonempty set");
  const auto d = static_cast<Eigen::Index>(set.dim());
  RowMatrixd acc = RowMatrixd::Zero(d, d);
  for (std::size_t t = 0; t < set.size(); ++t) {
    const Eigen::VectorXd x = set.row(t);
    acc.noalias() += x * x.transpose();
  }
  return Eigen::Map<const Eigen::VectorXd>(acc.data(), acc.size());
}

Eigen::VectorXd average_encode(const DescriptorSet& set) {
  if (set.size() == 0) throw std::invalid_argument("average pooling needs a nonempty set");
  return set.descriptors.cast<double>().colwise().mean().transpose();
}

Eigen::VectorXd concat_encode(const DescriptorGrid& grid) {
  return Eigen::Map<const Eigen::VectorXd>(grid.values().data(),
                                           static_cast<Eigen::Index>(grid.values().size()));
}

Eigen::VectorXd concat_encode(const DescriptorSet& set) {
  if (set.size() == 0) throw std::invalid_argument("concatenation needs a nonempty set");
  const RowMatrixd rows = set.descriptors.cast<double>();
  return Eigen::Map<const Eigen::VectorXd>(rows.data(), rows.size());
}

void save_gmm(const std::filesystem::path& path, const GmmModel& model) {
  io::ModelFile file;
  file.header = {{"format", "fvq-gmm"}, {"K", model.components()}, {"d", model.dim()}};
  file.add("weights", std::span<const double>(model.weights.data(), model.weights.size()));
  file.add("means", std::span<const double>(model.means.data(), model.means.size()));
  file.add("variances", std::span<const double>(model.variances.data(), model.variances.size()));
  io::save_model_file(file, path);
}

GmmModel load_gmm(const std::filesystem::path& path) {
  const io::ModelFile file = io::load_model_file(path);
  if (file.header.value("format", "") != "fvq-gmm") throw std::runtime_error("not a GMM model file");
  const auto k = file.header.at("K").get<Eigen::Index>();
  const auto d = file.header.at("d").get<Eigen::Index>();
  GmmModel m;
  m.weights = Eigen::Map<const Eigen::VectorXd>(file.get("weights").data(), k);
  m.means = Eigen::Map<const RowMatrixd>(file.get("means").data(), k, d);
  m.variances = Eigen::Map<const RowMatrixd>(file.get("variances").data(), k, d);
  m.weights /= m.weights.sum();  // undo float32 rounding drift
  return m;
}

void save_vlad(const std::filesystem::path& path, const VladCodebook& codebook) {
  io::ModelFile file;
  file.header = {{"format", "fvq-vlad"}, {"K", codebook.centers()}, {"d", codebook.dim()}};
  file.add("centroids",
           std::span<const double>(codebook.centroids.data(), codebook.centroids.size()));
  io::save_model_file(file, path);
}

VladCodebook load_vlad(const std::filesystem::path& path) {
  const io::ModelFile file = io::load_model_file(path);
  if (file.header.value("format", "") != "fvq-vlad") throw std::runtime_error("not a VLAD model file");
  const auto k = file.header.at("K").get<Eigen::Index>();
  const auto d = file.header.at("d").get<Eigen::Index>();
  return VladCodebook{Eigen::Map<const RowMatrixd>(file.get("centroids").data(), k, d)};
}

}  // namespace fvq
