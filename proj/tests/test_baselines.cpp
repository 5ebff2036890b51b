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

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>

#include "doctest.h"
#include "fvq/baselines.hpp"
#include "fvq/kmeans.hpp"
#include "fvq/preprocess.hpp"
#include "oracles.hpp"

using namespace fvq;

using namespace fvq::testing;

TEST_CASE("fit_gmm with one component is the sample moments") {
  Rng rng(1);
  const RowMatrixd x = random_rows(200, 3, rng, 2.0);
  const GmmModel g = fit_gmm(x, 1, 5);
  const Eigen::RowVectorXd mean = x.colwise().mean();
  const Eigen::RowVectorXd var = (x.rowwise() - mean).cwiseAbs2().colwise().mean();
  CHECK(g.weights[0] == doctest::Approx(1.0));
  for (int j = 0; j < 3; ++j) {
    CHECK(std::abs(g.means(0, j) - mean[j]) <= 1e-8);
    CHECK(std::abs(g.variances(0, j) - var[j]) <= 1e-8);
  }
}

TEST_CASE("fit_gmm recovers well separated components") {
  Rng rng(2);
  const double separation = 10.0;
  RowMatrixd truth(3, 2);
  truth << 0.0, 0.0, separation, 0.0, 0.0, separation;
  RowMatrixd x(900, 2);
  for (Eigen::Index i = 0; i < 900; ++i)
    x.row(i) = truth.row(i % 3) + Eigen::RowVector2d(rng.normal(), rng.normal());
  std::vector<double> trace;
  const GmmModel g = fit_gmm(x, 3, 11, {}, &trace);
  std::vector<bool> used(3, false);
  for (Eigen::Index t = 0; t < 3; ++t) {
    Eigen::Index best = -1;
    double best_dist = 0.0;
    for (Eigen::Index c = 0; c < 3; ++c) {
      if (used[c]) continue;
      const double dist = (g.means.row(c) - truth.row(t)).norm();
      if (best < 0 || dist < best_dist) {
        best = c;
        best_dist = dist;
      }
    }
    used[best] = true;
    CHECK(best_dist <= 0.1 * separation);
  }
  CHECK(g.weights.sum() == doctest::Approx(1.0).epsilon(1e-9));
  REQUIRE(trace.size() >= 2);
  for (std::size_t i = 1; i < trace.size(); ++i) CHECK(trace[i] >= trace[i - 1] - 1e-9);
}

TEST_CASE("fit_gmm EM monotonicity and invariants on overlapping data") {
  Rng rng(3);
  const RowMatrixd x = random_rows(300, 4, rng);
  std::vector<double> trace;
  GmmFitOptions opts;
  opts.relative_tolerance = 0.0;
  opts.max_iterations = 60;
  const GmmModel g = fit_gmm(x, 4, 3, opts, &trace);
  for (std::size_t i = 1; i < trace.size(); ++i) CHECK(trace[i] >= trace[i - 1] - 1e-9);
  CHECK(std::abs(g.weights.sum() - 1.0) <= 1e-9);
  CHECK(g.weights.minCoeff() > 0.0);
  const Eigen::RowVectorXd mean = x.colwise().mean();
  const double floor = 1e-6 * (x.rowwise() - mean).cwiseAbs2().colwise().mean().mean();
  CHECK(g.variances.minCoeff() >= floor);
  CHECK_THROWS(fit_gmm(random_rows(3, 2, rng), 4, 1));

  const GmmModel again = fit_gmm(x, 4, 3, opts);
  CHECK(again.means == g.means);
  CHECK(again.variances == g.variances);
}

TEST_CASE("gmm_fv_encode") {
  SUBCASE("descriptor at the mean of a single component") {
    GmmModel g;
    g.weights = Eigen::VectorXd::Ones(1);
    g.means = RowMatrixd(1, 3);
    g.means << 0.5, -1.0, 2.0;
    g.variances = RowMatrixd::Constant(1, 3, 0.7);
    const FisherVector fv = gmm_fv_encode(g, set_from(g.means));
    REQUIRE(fv.size() == 6);
    for (int j = 0; j < 3; ++j) {
      CHECK(fv.values[j] == 0.0);
      CHECK(fv.values[3 + j] == doctest::Approx(-1.0 / std::sqrt(2.0)).epsilon(1e-15));
    }
  }
  SUBCASE("matches the literal formulas") {
    Rng rng(4);
    for (int trial = 0; trial < 30; ++trial) {
      const std::size_t k = 1 + rng.index(4), d = 1 + rng.index(8), n = 1 + rng.index(64);
      const GmmModel g = random_gmm(k, d, rng);
      const RowMatrixd x = random_rows(n, d, rng);
      const FisherVector fv = gmm_fv_encode(g, set_from(x));
      const std::vector<double> ref = naive_gmm_fv(g, x);
      REQUIRE(fv.size() == ref.size());
      for (std::size_t i = 0; i < ref.size(); ++i) CHECK(std::abs(fv.values[i] - ref[i]) <= 1e-10);
    }
  }
  SUBCASE("responsibilities sum to one") {
    Rng rng(5);
    const GmmModel g = random_gmm(4, 3, rng);
    for (int t = 0; t < 50; ++t) {
      const Eigen::VectorXd x = random_rows(1, 3, rng, 3.0).row(0).transpose();
      CHECK(std::abs(g.responsibilities(x).sum() - 1.0) <= 1e-9);
    }
  }
  SUBCASE("dimension mismatch") {
    Rng rng(6);
    CHECK_THROWS(gmm_fv_encode(random_gmm(2, 3, rng), set_from(random_rows(2, 4, rng))));
  }
}

TEST_CASE("fit_vlad") {
  SUBCASE("exact points") {
    RowMatrixd pts(3, 2);
    pts << 0.0, 0.0, 5.0, 1.0, -2.0, 4.0;
    RowMatrixd x(30, 2);
    for (Eigen::Index i = 0; i < 30; ++i) x.row(i) = pts.row(i % 3);
    const VladCodebook cb = fit_vlad(x, 3, 1);
    for (Eigen::Index p = 0; p < 3; ++p) {
      bool found = false;
      for (Eigen::Index c = 0; c < 3; ++c) found = found || cb.centroids.row(c) == pts.row(p);
      CHECK(found);
    }
  }
  SUBCASE("one center is the mean") {
    Rng rng(7);
    const RowMatrixd x = random_rows(50, 4, rng);
    const VladCodebook cb = fit_vlad(x, 1, 2);
    CHECK((cb.centroids.row(0) - x.colwise().mean()).cwiseAbs().maxCoeff() <= 1e-12);
  }
  SUBCASE("wcss never increases") {
    Rng rng(8);
    const RowMatrixd x = random_rows(400, 3, rng);
    std::vector<double> trace;
    fit_vlad(x, 8, 3, &trace);
    REQUIRE(trace.size() >= 2);
    for (std::size_t i = 1; i < trace.size(); ++i) CHECK(trace[i] <= trace[i - 1] + 1e-12);
  }
  SUBCASE("too few distinct descriptors") {
    RowMatrixd x = RowMatrixd::Ones(5, 2);
    CHECK_THROWS(fit_vlad(x, 2, 1));
  }
  SUBCASE("ties go to the lowest centroid") {
    RowMatrixd c(2, 1);
    c << -1.0, 1.0;
    CHECK(nearest_centroid(c, Eigen::VectorXd::Zero(1)) == 0);
  }
}

TEST_CASE("vlad_encode") {
  Rng rng(9);
  SUBCASE("descriptors at centroids") {
    VladCodebook cb{random_rows(3, 4, rng)};
    RowMatrixd x(6, 4);
    x << cb.centroids, cb.centroids;
    CHECK(vlad_encode(cb, set_from(x)).isZero(0.0));
  }
  SUBCASE("matches a double loop") {
    for (int trial = 0; trial < 30; ++trial) {
      const std::size_t k = 1 + rng.index(4), d = 1 + rng.index(8), n = 1 + rng.index(64);
      VladCodebook cb{random_rows(k, d, rng)};
      const RowMatrixd x = random_rows(n, d, rng);
      const Eigen::VectorXd v = vlad_encode(cb, set_from(x));
      const std::vector<double> ref = naive_vlad(cb.centroids, x);
      REQUIRE(static_cast<std::size_t>(v.size()) == ref.size());
      for (std::size_t i = 0; i < ref.size(); ++i) CHECK(std::abs(v[i] - ref[i]) <= 1e-12);
    }
  }
  SUBCASE("permutation invariance and additivity") {
    VladCodebook cb{random_rows(3, 3, rng)};
    const RowMatrixd x = random_rows(10, 3, rng);
    const RowMatrixd rev = x.colwise().reverse();
    const Eigen::VectorXd a = vlad_encode(cb, set_from(x));
    CHECK((a - vlad_encode(cb, set_from(rev))).cwiseAbs().maxCoeff() <= 1e-12);
    const Eigen::VectorXd parts =
        vlad_encode(cb, set_from(x.topRows(4))) + vlad_encode(cb, set_from(x.bottomRows(6)));
    CHECK((a - parts).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("bilinear_encode") {
  RowMatrixd one(1, 2);
  one << 1.0, 0.0;
  const Eigen::VectorXd v = bilinear_encode(set_from(one));
  CHECK(v == Eigen::Vector4d(1.0, 0.0, 0.0, 0.0));

  Rng rng(10);
  const RowMatrixd x = random_rows(7, 5, rng);
  const Eigen::VectorXd b = bilinear_encode(set_from(x));
  const Eigen::Map<const RowMatrixd> m(b.data(), 5, 5);
  CHECK((m - m.transpose()).cwiseAbs().maxCoeff() == 0.0);
  const Eigen::MatrixXd dense = m;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(dense);
  CHECK(eig.eigenvalues().minCoeff() >= -1e-12);
  CHECK((b - bilinear_encode(set_from(x.colwise().reverse()))).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("average and concat encoders") {
  Rng rng(11);
  const RowMatrixd row = random_rows(1, 6, rng);
  const RowMatrixd same = row.replicate(5, 1);
  CHECK((average_encode(set_from(same)) - row.row(0).transpose()).cwiseAbs().maxCoeff() <= 1e-15);

  const RowMatrixd x = random_rows(9, 4, rng);
  CHECK((average_encode(set_from(x)) - average_encode(set_from(x.colwise().reverse())))
            .cwiseAbs().maxCoeff() <= 1e-15);

  DescriptorGrid grid(2, 3, 2);
  for (std::size_t h = 0; h < 2; ++h)
    for (std::size_t w = 0; w < 3; ++w)
      for (std::size_t c = 0; c < 2; ++c) grid.at(h, w, c) = static_cast<double>(h * 100 + w * 10 + c);
  const Eigen::VectorXd flat = concat_encode(grid);
  REQUIRE(flat.size() == 12);
  CHECK(flat[0] == 0.0);
  CHECK(flat[1] == 1.0);
  CHECK(flat[2] == 10.0);
  CHECK(flat[11] == 121.0);
  CHECK(concat_encode(set_from(x)).size() == 36);
}

TEST_CASE("full-size dimensions") {
  DescriptorSet one;
  one.descriptors = RowMatrixf::Constant(1, 512, 0.01f);
  GmmModel g;
  g.weights = Eigen::VectorXd::Constant(128, 1.0 / 128);
  g.means = RowMatrixd::Zero(128, 512);
  g.variances = RowMatrixd::Ones(128, 512);
  CHECK(gmm_fv_encode(g, one).size() == 131072);
  VladCodebook cb{RowMatrixd::Zero(256, 512)};
  for (Eigen::Index c = 0; c < 256; ++c) cb.centroids(c, c) = 1.0;
  CHECK(vlad_encode(cb, one).size() == 131072);
  CHECK(bilinear_encode(one).size() == 262144);
  CHECK(concat_encode(DescriptorGrid(7, 7, 512)).size() == 25088);
}

TEST_CASE("model files round trip") {
  Rng rng(12);
  const auto dir = std::filesystem::temp_directory_path();
  const GmmModel g = random_gmm(3, 4, rng);
  save_gmm(dir / "fvq_gmm_test.bin", g);
  const GmmModel gb = load_gmm(dir / "fvq_gmm_test.bin");
  CHECK((gb.means - g.means).cwiseAbs().maxCoeff() <= 1e-6);
  CHECK((gb.variances - g.variances).cwiseAbs().maxCoeff() <= 1e-6);
  CHECK(std::abs(gb.weights.sum() - 1.0) <= 1e-9);

  const VladCodebook cb{random_rows(5, 3, rng)};
  save_vlad(dir / "fvq_vlad_test.bin", cb);
  CHECK(load_vlad(dir / "fvq_vlad_test.bin").centroids == cb.centroids);
}
