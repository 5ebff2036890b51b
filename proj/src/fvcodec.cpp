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

#include "fvq/fvcodec.hpp"

#include <cmath>
#include <stdexcept>

#include "fvq/blob_io.hpp"
#include "fvq/preprocess.hpp"

namespace fvq {

namespace {

void check_dim(const VaeParams& params, const DescriptorSet& set) {
  if (set.dim() != params.dim())
    throw std::invalid_argument("dimension mismatch: set '" + set.set_id + "' has d=" +
                                std::to_string(set.dim()) + ", model expects " +
                                std::to_string(params.dim()));
}

void check_fim(const VaeParams& params, const FimDiagonal& fim) {
  if (static_cast<std::size_t>(fim.inv_sqrt.size()) !=
      fv_dimension(params.dim(), params.latent_dim()))
    throw std::invalid_argument("FIM length does not match the model");
}

}  // namespace

bool FimDiagonal::floored(std::size_t i) const {
  return inv_sqrt[static_cast<Eigen::Index>(i)] >= 1.0 / std::sqrt(eps_floor);
}

Eigen::VectorXd rec_grad(const VaeParams& params, const Eigen::VectorXd& x) {
  if (static_cast<std::size_t>(x.size()) != params.dim())
    throw std::invalid_argument("descriptor dimension does not match the model");
  const Eigen::VectorXd z = encoder_forward(params, x);
  const Eigen::VectorXd mu_x = decoder_forward(params, z);
  const double inv_var = std::exp(-params.log_var_x);
  const Eigen::Index d = x.size(), latent = z.size();

  Eigen::VectorXd r(d);
  for (Eigen::Index j = 0; j < d; ++j) r[j] = mu_x[j] > 0.0 ? (mu_x[j] - x[j]) * inv_var : 0.0;

  Eigen::VectorXd out((latent + 1) * d);
  for (Eigen::Index k = 0; k < latent; ++k) out.segment(k * d, d) = z[k] * r;
  out.segment(latent * d, d) = r;
  return out;
}

Eigen::VectorXd set_score(const VaeParams& params, const DescriptorSet& set) {
  check_dim(params, set);
  Eigen::VectorXd score =
      Eigen::VectorXd::Zero(static_cast<Eigen::Index>(fv_dimension(params.dim(), params.latent_dim())));
  for (std::size_t t = 0; t < set.size(); ++t) score -= rec_grad(params, set.row(t));
  return score;
}

FimDiagonal estimate_fim(const VaeParams& params, const Corpus& corpus, double eps_floor) {
  if (corpus.sets.empty()) throw std::invalid_argument("cannot estimate FIM on an empty corpus");
  if (!(eps_floor > 0.0)) throw std::invalid_argument("eps_floor must be > 0");
  const auto m = static_cast<Eigen::Index>(fv_dimension(params.dim(), params.latent_dim()));
  Eigen::VectorXd second_moment = Eigen::VectorXd::Zero(m);
  for (const auto& set : corpus.sets) second_moment += set_score(params, set).array().square().matrix();
  second_moment /= static_cast<double>(corpus.sets.size());

  FimDiagonal fim;
  fim.eps_floor = eps_floor;
  fim.inv_sqrt = second_moment.cwiseMax(eps_floor).cwiseSqrt().cwiseInverse();
  return fim;
}

FisherVector extract_fv(const VaeParams& params, const FimDiagonal& fim, const DescriptorSet& set) {
  check_fim(params, fim);
  FisherVector fv;
  fv.values = fim.inv_sqrt.cwiseProduct(set_score(params, set));
  fv.flags.fim_applied = true;
  return fv;
}

FisherVector aggregate_fvs(std::span<const FisherVector> fvs) {
  if (fvs.empty()) throw std::invalid_argument("cannot aggregate an empty FV list");
  const FisherVector& first = fvs.front();
  if (first.flags.power_applied || first.flags.l2_applied)
    throw std::invalid_argument("aggregate FVs before power/L2 normalization");
  FisherVector out;
  out.flags = first.flags;
  out.values = Eigen::VectorXd::Zero(first.values.size());
  for (const auto& fv : fvs) {
    if (!(fv.flags == first.flags)) throw std::invalid_argument("FV flag mismatch");
    if (fv.values.size() != first.values.size()) throw std::invalid_argument("FV length mismatch");
    out.values += fv.values;
  }
  out.values /= static_cast<double>(fvs.size());
  return out;
}

FisherVector power_l2_normalize(const FisherVector& fv) {
  if (fv.flags.power_applied || fv.flags.l2_applied)
    throw std::invalid_argument("FV is already power/L2 normalized");
  FisherVector out = fv;
  for (Eigen::Index i = 0; i < out.values.size(); ++i) {
    const double v = out.values[i];
    out.values[i] = v < 0.0 ? -std::sqrt(-v) : std::sqrt(v);
  }
  out.values = l2_normalize(out.values);
  out.flags.power_applied = true;
  out.flags.l2_applied = true;
  return out;
}

double fisher_kernel(const FisherVector& a, const FisherVector& b) {
  if (a.values.size() != b.values.size()) throw std::invalid_argument("FV length mismatch");
  if (!(a.flags == b.flags)) throw std::invalid_argument("FV flag mismatch");
  return a.values.dot(b.values);
}

std::vector<double> attention_values(const VaeParams& params, const FimDiagonal& fim,
                                     const DescriptorSet& set) {
  check_dim(params, set);
  check_fim(params, fim);
  std::vector<double> values(set.size());
  for (std::size_t t = 0; t < set.size(); ++t)
    values[t] = fim.inv_sqrt.cwiseProduct(rec_grad(params, set.row(t))).lpNorm<1>();
  return values;
}

Eigen::VectorXd PcaModel::project(const Eigen::VectorXd& x) const {
  return basis.transpose() * (x - mean);
}

RowMatrixd PcaModel::reconstruct() const {
  RowMatrixd out = projected * basis.transpose();
  out.rowwise() += mean.transpose();
  return out;
}

PcaModel pca_compress(const RowMatrixd& data, std::size_t k) {
  const Eigen::Index n = data.rows(), m = data.cols();
  if (k == 0 || k > static_cast<std::size_t>(std::min(n, m)))
    throw std::invalid_argument("PCA target dimension out of range");

  PcaModel pca;
  pca.mean = data.colwise().mean().transpose();
  const RowMatrixd centered = data.rowwise() - pca.mean.transpose();
  const Eigen::MatrixXd gram = centered * centered.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  if (eig.info() != Eigen::Success) throw std::runtime_error("Gram eigendecomposition failed");

  // Eigen returns ascending eigenvalues.
  const Eigen::VectorXd evals = eig.eigenvalues().reverse();
  const Eigen::MatrixXd evecs = eig.eigenvectors().rowwise().reverse();
  const double cutoff = 1e-10 * std::max(evals[0], 1e-300);

  const auto kk = static_cast<Eigen::Index>(k);
  pca.basis = Eigen::MatrixXd::Zero(m, kk);
  pca.explained_variance = Eigen::VectorXd::Zero(kk);
  Eigen::Index filled = 0;
  for (; filled < kk && evals[filled] > cutoff; ++filled) {
    pca.basis.col(filled) = centered.transpose() * evecs.col(filled) / std::sqrt(evals[filled]);
    pca.explained_variance[filled] = evals[filled] / static_cast<double>(n);
  }
  // Re-orthonormalize, then complete with directions carrying no variance.
  auto orthogonalize = [&](Eigen::VectorXd v, Eigen::Index upto) {
    for (int pass = 0; pass < 2; ++pass)
      for (Eigen::Index c = 0; c < upto; ++c) v -= pca.basis.col(c).dot(v) * pca.basis.col(c);
    return v;
  };
  for (Eigen::Index c = 0; c < filled; ++c)
    pca.basis.col(c) = orthogonalize(pca.basis.col(c), c).normalized();
  for (Eigen::Index j = 0; filled < kk && j < m; ++j) {
    Eigen::VectorXd v = orthogonalize(Eigen::VectorXd::Unit(m, j), filled);
    if (v.norm() > 1e-6) pca.basis.col(filled++) = v.normalized();
  }
  pca.projected = centered * pca.basis;
  return pca;
}

void save_fim(const std::filesystem::path& path, const FimDiagonal& fim, std::size_t dim,
              std::size_t latent_dim) {
  nlohmann::json sidecar = {{"kind", "fim"},
                            {"M", fim.inv_sqrt.size()},
                            {"d", dim},
                            {"d_z", latent_dim},
                            {"eps_floor", fim.eps_floor}};
  io::save_matrix_with_sidecar(path, std::span<const double>(fim.inv_sqrt.data(), fim.inv_sqrt.size()),
                               1, static_cast<std::size_t>(fim.inv_sqrt.size()), sidecar);
}

FimDiagonal load_fim(const std::filesystem::path& path) {
  const auto m = io::load_matrix_with_sidecar(path);
  if (m.sidecar.value("kind", "") != "fim") throw std::runtime_error("not a FIM export");
  FimDiagonal fim;
  fim.eps_floor = m.sidecar.at("eps_floor").get<double>();
  fim.inv_sqrt = Eigen::Map<const Eigen::VectorXd>(m.values.data(), static_cast<Eigen::Index>(m.values.size()));
  return fim;
}

}  // namespace fvq
