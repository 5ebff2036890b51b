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

#include <cmath>
#include <filesystem>
#include <numbers>

#include "doctest.h"
#include "fvq/preprocess.hpp"
#include "fvq/vae.hpp"
#include "gradient_check.hpp"

using namespace fvq;
using fvq::testing::random_params;
using fvq::testing::random_vector;

namespace {

const double kLog2Pi = std::log(2.0 * std::numbers::pi);

// Straight-line forward passes used as oracles.
Eigen::VectorXd naive_encoder(const VaeParams& p, const Eigen::VectorXd& x) {
  const std::size_t d = p.dim(), h = p.hidden(), l = p.latent_dim();
  std::vector<double> hidden(h);
  for (std::size_t j = 0; j < h; ++j) {
    double acc = p.enc_b1[j];
    for (std::size_t i = 0; i < d; ++i) acc += p.enc_w1(i, j) * x[i];
    hidden[j] = acc > 0.0 ? acc : 0.0;
  }
  Eigen::VectorXd out(l);
  for (std::size_t k = 0; k < l; ++k) {
    double acc = p.enc_b2[k];
    for (std::size_t j = 0; j < h; ++j) acc += p.enc_w2(j, k) * hidden[j];
    out[k] = acc;
  }
  return out;
}

Eigen::VectorXd naive_decoder(const VaeParams& p, const Eigen::VectorXd& z) {
  Eigen::VectorXd out(p.dim());
  for (std::size_t j = 0; j < p.dim(); ++j) {
    double acc = p.dec_b[j];
    for (std::size_t k = 0; k < p.latent_dim(); ++k) acc += p.dec_w(k, j) * z[k];
    out[j] = acc > 0.0 ? acc : 0.0;
  }
  return out;
}

double max_rel_diff(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i)
    worst = std::max(worst, std::abs(a[i] - b[i]) / std::max({std::abs(a[i]), std::abs(b[i]), 1e-300}));
  return worst;
}

VaeConfig small_config(std::size_t d, std::size_t h, std::size_t l, std::size_t k) {
  VaeConfig cfg;
  cfg.dim = d;
  cfg.hidden = h;
  cfg.latent_dim = l;
  cfg.num_classes = k;
  return cfg;
}

}  // namespace

TEST_CASE("encoder_forward") {
  SUBCASE("zero parameters give zero latent") {
    const VaeParams p = VaeParams::zeros(4, 5, 3, 2);
    Rng rng(1);
    CHECK(encoder_forward(p, random_vector(4, rng)).isZero(0.0));
  }
  SUBCASE("identity weights pass nonnegative input through") {
    VaeParams p = VaeParams::zeros(4, 4, 4, 2);
    p.enc_w1.setIdentity();
    p.enc_w2.setIdentity();
    Eigen::VectorXd x(4);
    x << 0.0, 0.5, 1.5, 3.0;
    CHECK(encoder_forward(p, x) == x);
  }
  SUBCASE("matches a straight-line oracle") {
    Rng rng(17);
    for (int trial = 0; trial < 20; ++trial) {
      const VaeParams p = random_params(7, 9, 5, 3, rng);
      const Eigen::VectorXd x = random_vector(7, rng);
      CHECK(max_rel_diff(encoder_forward(p, x), naive_encoder(p, x)) <= 1e-10);
    }
  }
}

TEST_CASE("decoder_forward") {
  VaeParams p = VaeParams::zeros(4, 4, 3, 2);
  Rng rng(2);
  const Eigen::VectorXd z = random_vector(3, rng);
  CHECK(decoder_forward(p, z).isZero(0.0));
  p.dec_b.setConstant(-1.0);
  CHECK(decoder_forward(p, z).isZero(0.0));
  for (int trial = 0; trial < 20; ++trial) {
    const VaeParams q = random_params(6, 4, 5, 2, rng);
    const Eigen::VectorXd zz = random_vector(5, rng);
    CHECK(max_rel_diff(decoder_forward(q, zz), naive_decoder(q, zz)) <= 1e-10);
  }
}

TEST_CASE("sample_latent") {
  Rng rng(3);
  const Eigen::VectorXd mu = random_vector(6, rng);
  const Eigen::VectorXd tiny_var = Eigen::VectorXd::Constant(6, -60.0);
  CHECK((sample_latent(mu, tiny_var, rng) - mu).cwiseAbs().maxCoeff() <= 1e-12);

  Rng a(9), b(9);
  const Eigen::VectorXd lv = random_vector(6, rng);
  CHECK(sample_latent(mu, lv, a) == sample_latent(mu, lv, b));

  // Monte Carlo moments of the standard case.
  Rng mc(123);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(3);
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(3), sq = Eigen::VectorXd::Zero(3);
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd z = sample_latent(zero, zero, mc);
    sum += z;
    sq += z.cwiseProduct(z);
  }
  for (int k = 0; k < 3; ++k) {
    const double mean = sum[k] / n;
    const double var = sq[k] / n - mean * mean;
    CHECK(std::abs(mean) <= 0.02);
    CHECK(var >= 0.97);
    CHECK(var <= 1.03);
  }
}

TEST_CASE("reconstruction_loss") {
  Eigen::VectorXd x(3);
  x << 0.1, 0.2, 0.3;
  CHECK(reconstruction_loss(x, x, 0.0) == doctest::Approx(1.5 * kLog2Pi).epsilon(1e-15));

  Eigen::VectorXd x1 = Eigen::VectorXd::Zero(1), mu1 = Eigen::VectorXd::Constant(1, 2.0);
  CHECK(reconstruction_loss(x1, mu1, 0.0) == doctest::Approx(2.0 + 0.5 * kLog2Pi).epsilon(1e-15));

  // Doubling sigma: quadratic term / 4, constant + d log 2.
  Rng rng(4);
  const Eigen::VectorXd a = random_vector(5, rng), b = random_vector(5, rng);
  const double lv = 0.3;
  const double lv2 = lv + 2.0 * std::log(2.0);
  const double quad = 0.5 * (a - b).squaredNorm() * std::exp(-lv);
  const double cst = 2.5 * (lv + kLog2Pi);
  CHECK(reconstruction_loss(a, b, lv) == doctest::Approx(quad + cst).epsilon(1e-14));
  CHECK(reconstruction_loss(a, b, lv2) ==
        doctest::Approx(quad / 4.0 + cst + 5.0 * std::log(2.0)).epsilon(1e-14));
}

TEST_CASE("regularization_loss") {
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(4);
  CHECK(regularization_loss(zero, zero) == 0.0);
  CHECK(regularization_loss(Eigen::VectorXd::Ones(1), Eigen::VectorXd::Zero(1)) ==
        doctest::Approx(0.5));
  Rng rng(6);
  for (int trial = 0; trial < 500; ++trial) {
    const Eigen::VectorXd mu = random_vector(3, rng) * 2.0, lv = random_vector(3, rng) * 3.0;
    CHECK(regularization_loss(mu, lv) >= 0.0);
    CHECK(regularization_loss(mu, lv) > 0.0);  // mu != 0 almost surely
  }
}

TEST_CASE("classification_loss") {
  VaeParams p = VaeParams::zeros(2, 2, 3, 5);
  Rng rng(7);
  const Eigen::VectorXd z = random_vector(3, rng);
  CHECK(classification_loss(p, z, 2) == doctest::Approx(std::log(5.0)).epsilon(1e-15));

  VaeParams sat = VaeParams::zeros(2, 2, 1, 3);
  sat.cls_b << -30.0, 30.0, -30.0;
  CHECK(classification_loss(sat, Eigen::VectorXd::Zero(1), 1) < 1e-12);

  for (int trial = 0; trial < 100; ++trial) {
    const VaeParams q = random_params(2, 2, 3, 4, rng, 3.0);
    CHECK(classification_loss(q, random_vector(3, rng), rng.index(4)) >= 0.0);
  }
  CHECK_THROWS(classification_loss(p, z, 5));
}

TEST_CASE("analytic gradients match central finite differences") {
  Rng rng(2718);
  for (int draw = 0; draw < 12; ++draw) {
    const std::size_t d = 3 + rng.index(5), h = 2 + rng.index(6), l = 2 + rng.index(4),
                      k = 2 + rng.index(3);
    VaeConfig cfg = small_config(d, h, l, k);
    cfg.lambda3 = 0.5 + rng.uniform() * 3.0;
    cfg.dropout_rate = 0.3;
    const VaeParams p = random_params(d, h, l, k, rng);
    const Eigen::VectorXd x = l2_normalize(random_vector(d, rng).cwiseAbs());
    const SampleNoise noise = draw_noise(cfg, rng);
    const auto result = fvq::testing::check_vae_gradients(p, x, rng.index(k), cfg, noise);
    INFO("draw " << draw << " worst: " << result.worst);
    CHECK(result.failures == 0);
  }
}

TEST_CASE("LossBreakdown.total is the weighted sum") {
  Rng rng(8);
  VaeConfig cfg = small_config(4, 4, 3, 3);
  cfg.lambda1 = 0.7;
  cfg.lambda2 = 1.3;
  cfg.lambda3 = 11.0;
  const VaeParams p = random_params(4, 4, 3, 3, rng);
  const auto lg = fused_loss_and_grads(p, random_vector(4, rng), 1, cfg, rng);
  CHECK(lg.loss.total == cfg.lambda1 * lg.loss.rec + cfg.lambda2 * lg.loss.reg + cfg.lambda3 * lg.loss.cls);
  CHECK(lg.loss.lower_bound == -(lg.loss.rec + lg.loss.reg));
}

TEST_CASE("zero loss weights give zero gradients") {
  Rng rng(9);
  VaeConfig cfg = small_config(5, 4, 3, 2);
  cfg.lambda1 = cfg.lambda2 = cfg.lambda3 = 0.0;
  const VaeParams p = random_params(5, 4, 3, 2, rng);
  const auto lg = fused_loss_and_grads(p, random_vector(5, rng), 0, cfg, rng);
  CHECK(lg.loss.total == 0.0);
  for (auto t : lg.grads.tensors())
    for (double v : t) CHECK(v == 0.0);
}

TEST_CASE("lambda3 = 0 decouples the classifier head") {
  Rng rng(10);
  VaeConfig cfg = small_config(5, 4, 3, 4);
  cfg.lambda3 = 0.0;
  const VaeParams p = random_params(5, 4, 3, 4, rng);
  const auto lg = fused_loss_and_grads(p, random_vector(5, rng), 2, cfg, rng);
  CHECK(lg.grads.cls_w.isZero(0.0));
  CHECK(lg.grads.cls_b.isZero(0.0));
  CHECK_FALSE(lg.grads.dec_w.isZero(0.0));
}

TEST_CASE("adadelta_step") {
  SUBCASE("zero gradients leave parameters untouched and decay accumulators") {
    Rng rng(11);
    VaeParams p = random_params(3, 3, 2, 2, rng);
    const VaeParams before = p;
    AdaDeltaState s = AdaDeltaState::fresh(p);
    for (auto t : s.mean_sq_grad.tensors())
      for (double& v : t) v = 0.5;
    const VaeParams zero = VaeParams::zeros(3, 3, 2, 2);
    adadelta_step(p, zero, s);
    for (std::size_t t = 0; t < VaeParams::kTensorCount; ++t)
      for (std::size_t i = 0; i < p.tensors()[t].size(); ++i) {
        CHECK(p.tensors()[t][i] == before.tensors()[t][i]);
        CHECK(s.mean_sq_grad.tensors()[t][i] == doctest::Approx(0.475));
      }
  }
  SUBCASE("first step on a unit gradient") {
    double param = 0.0, msg = 0.0, msd = 0.0;
    const double delta = adadelta_update(param, 1.0, msg, msd, 0.95, 1e-6, 1.0);
    const double expected = -std::sqrt(1e-6) / std::sqrt(0.05 + 1e-6);
    CHECK(delta == doctest::Approx(expected).epsilon(1e-14));
    CHECK(delta == doctest::Approx(-4.47209e-3).epsilon(1e-5));
    CHECK(param == delta);
  }
  SUBCASE("first step is nearly scale free") {
    double p1 = 0.0, g1 = 0.0, d1 = 0.0, p2 = 0.0, g2 = 0.0, d2 = 0.0;
    const double small = adadelta_update(p1, 0.37, g1, d1, 0.95, 1e-6, 1.0);
    const double large = adadelta_update(p2, 370.0, g2, d2, 0.95, 1e-6, 1.0);
    CHECK(std::abs(large - small) / std::abs(small) < 0.01);
  }
  SUBCASE("whole-parameter step uses the scalar rule everywhere") {
    Rng rng(12);
    VaeParams p = random_params(3, 2, 2, 2, rng);
    const VaeParams g = random_params(3, 2, 2, 2, rng);
    VaeParams expected = p;
    AdaDeltaState s = AdaDeltaState::fresh(p);
    adadelta_step(p, g, s);
    for (std::size_t t = 0; t < VaeParams::kTensorCount; ++t)
      for (std::size_t i = 0; i < p.tensors()[t].size(); ++i) {
        double ref = expected.tensors()[t][i], m1 = 0.0, m2 = 0.0;
        adadelta_update(ref, g.tensors()[t][i], m1, m2, 0.95, 1e-6, 1.0);
        CHECK(p.tensors()[t][i] == ref);
      }
  }
}

TEST_CASE("initialization follows the scaled-uniform rule") {
  VaeConfig cfg = small_config(16, 16, 8, 4);
  Rng rng(13);
  const VaeParams p = VaeParams::initialize(cfg, rng);
  const double bound = std::sqrt(6.0 / (16 + 16));
  CHECK(p.enc_w1.cwiseAbs().maxCoeff() <= bound);
  CHECK(p.enc_w1.cwiseAbs().maxCoeff() > 0.5 * bound);
  CHECK(p.enc_b1.isZero(0.0));
  CHECK(p.log_var_x == 0.0);
  CHECK(p.log_var_z.isZero(0.0));
}

namespace {

Corpus small_training_corpus() {
  SyntheticSpec spec;
  spec.num_classes = 4;
  spec.sets_per_class = 10;
  spec.descriptors_per_set = 10;
  spec.dim = 16;
  spec.seed = 21;
  return l2_normalize_corpus(generate_synthetic(spec).first);
}

}  // namespace

TEST_CASE("training lowers the loss, is deterministic, and respects lambda3 = 0") {
  const Corpus corpus = small_training_corpus();
  VaeConfig cfg = small_config(16, 16, 8, 4);
  cfg.batch_size = 32;
  cfg.max_batches = 400;
  cfg.seed = 5;
  const TrainResult a = train_vae(corpus, cfg);
  REQUIRE(a.trace.batches.size() == 400);
  CHECK(a.trace.mean_total(360, 400) < a.trace.mean_total(0, 40));

  const TrainResult b = train_vae(corpus, cfg);
  const auto ta = a.params.tensors(), tb = b.params.tensors();
  for (std::size_t t = 0; t < VaeParams::kTensorCount; ++t)
    CHECK(std::equal(ta[t].begin(), ta[t].end(), tb[t].begin()));

  cfg.lambda3 = 0.0;
  const TrainResult c = train_vae(corpus, cfg);
  CHECK(c.params.cls_w == c.initial.cls_w);
  CHECK(c.params.cls_b == c.initial.cls_b);
  CHECK_FALSE(c.params.dec_w == c.initial.dec_w);
}

TEST_CASE("training input validation") {
  VaeConfig cfg = small_config(16, 16, 8, 4);
  cfg.max_batches = 1;
  Corpus empty;
  empty.dim = 16;
  empty.num_classes = 4;
  CHECK_THROWS_AS(train_vae(empty, cfg), std::invalid_argument);
  cfg.dim = 8;
  CHECK_THROWS_AS(train_vae(small_training_corpus(), cfg), std::invalid_argument);
}

TEST_CASE("trace CSV layout") {
  TrainingTrace trace;
  trace.batches.push_back({1.0, 2.0, 3.0, 6.0, -3.0});
  CHECK(trace.to_csv() == "batch,rec,reg,cls,total,lower_bound\n0,1,2,3,6,-3\n");
}

TEST_CASE("checkpoint round trip") {
  Rng rng(14);
  VaeConfig cfg = small_config(5, 6, 3, 2);
  cfg.seed = 77;
  Checkpoint ckpt{random_params(5, 6, 3, 2, rng), cfg, 123};
  const auto path = std::filesystem::temp_directory_path() / "fvq_ckpt_test.bin";
  save_checkpoint(path, ckpt);
  const Checkpoint back = load_checkpoint(path);
  CHECK(back.batch_index == 123);
  CHECK(back.cfg.seed == 77);
  CHECK(back.cfg.latent_dim == 3);
  REQUIRE(back.params.same_shape(ckpt.params));
  for (std::size_t t = 0; t < VaeParams::kTensorCount; ++t)
    for (std::size_t i = 0; i < back.params.tensors()[t].size(); ++i)
      CHECK(back.params.tensors()[t][i] ==
            static_cast<double>(static_cast<float>(ckpt.params.tensors()[t][i])));
}
