/*
 *  Copyright 2026 The EIM Authors
 *
 *  Licensed under the Apache License, Version 2.0 (the "License");
 *  you may not use this file except in compliance with the License.
 *  You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 *  Unless required by applicable law or agreed to in writing, software
 *  distributed under the License is distributed on an "AS IS" BASIS,
 *  WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 *  See the License for the specific language governing permissions and
 *  limitations under the License.
 */

#include <doctest.h>

#include <algorithm>
#include <limits>

#include "core/eim_gmm.hpp"
#include "core/em.hpp"
#include "core/errors.hpp"
#include "core/fgan.hpp"
#include "core/serialization.hpp"
#include "support/oracles.hpp"

using namespace eim;
using namespace eim::testing;

namespace {

Matrix bimodal(int n, std::uint64_t seed) {
  Rng rng(seed);
  return gmm_1d({0.5, 0.5}, {-5, 5}, {1, 1}).sample(n, rng).x;
}

}  // namespace

TEST_CASE("one-component EM is the closed-form MLE") {
  Rng rng(1);
  Matrix data(500, 3);
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    for (Eigen::Index j = 0; j < 3; ++j) data(i, j) = rng.normal() * (j + 1) + j;
  }
  EmConfig cfg;
  cfg.iterations = 1;
  const Gmm init({Gaussian(Vector::Zero(3), Matrix::Identity(3, 3))}, Categorical(v1(1.0)));
  const EmResult res = run_em_gmm(data, init, cfg);
  const Vector mean = data.colwise().mean().transpose();
  const Matrix centered = data.rowwise() - mean.transpose();
  Matrix cov = centered.transpose() * centered / static_cast<double>(data.rows());
  cov.diagonal().array() += cfg.covariance_floor;
  CHECK((res.model.component(0).mean() - mean).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK((res.model.component(0).covariance() - cov).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("one-component EM averages the modes") {
  const Matrix data = bimodal(4000, 2);
  EmConfig cfg;
  cfg.iterations = 5;
  const Gmm init = gmm_1d({1.0}, {3.0}, {1.0});
  const EmResult res = run_em_gmm(data, init, cfg);
  CHECK(std::abs(res.model.component(0).mean()[0]) <= 0.3);
}

TEST_CASE("EM separates well-separated clusters") {
  const Matrix data = bimodal(2000, 3);
  EmConfig cfg;
  cfg.iterations = 30;
  const EmResult res = run_em_gmm(data, gmm_1d({0.5, 0.5}, {-2, 2}, {4, 4}), cfg);
  std::vector<double> means = {res.model.component(0).mean()[0], res.model.component(1).mean()[0]};
  std::sort(means.begin(), means.end());
  CHECK(means[0] == doctest::Approx(-5).epsilon(0.02));
  CHECK(means[1] == doctest::Approx(5).epsilon(0.02));
  const Matrix r = responsibilities(res.model, data);
  CHECK((r.array() * (1.0 - r.array())).maxCoeff() <= 1e-4);
}

TEST_CASE("EM log-likelihood never decreases") {
  Rng rng(4);
  const Matrix data = gmm_1d({0.2, 0.3, 0.5}, {-3, 0, 4}, {0.5, 2, 1}).sample(1500, rng).x;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    EmConfig cfg;
    cfg.iterations = 60;
    const EmResult res = run_em_gmm(data, init_gmm_from_data(data, 4, seed), cfg);
    REQUIRE(res.log_likelihood.size() == 61);
    for (std::size_t i = 1; i < res.log_likelihood.size(); ++i) {
      CHECK(res.log_likelihood[i] >= res.log_likelihood[i - 1] - 1e-8);
    }
  }
}

TEST_CASE("EM reseeds an empty component") {
  const Matrix data = bimodal(500, 5);
  EmConfig cfg;
  cfg.iterations = 2;
  const EmResult res = run_em_gmm(data, gmm_1d({0.5, 0.5}, {0, 1000}, {1, 1}), cfg);
  REQUIRE(!res.events.empty());
  CHECK(res.events[0].component == 1);
  CHECK(std::abs(res.model.component(1).mean()[0]) < 20);
  CHECK_THROWS_AS(run_em_gmm(Matrix::Zero(1, 1), gmm_1d({1.0}, {0}, {1}), cfg), InputError);
}

TEST_CASE("f-GAN and b-GAN objectives are the same expression") {
  Rng rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    Vector a(100), b(80);
    for (Eigen::Index i = 0; i < a.size(); ++i) a[i] = 2 * rng.normal();
    for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = 2 * rng.normal();
    const double direct = -(-a.array()).exp().mean() + (1.0 - b.array()).mean();
    CHECK(std::abs(fgan_objective(a, b) - bgan_objective(a, b)) <= 1e-12 * (1 + std::abs(direct)));
    CHECK(std::abs(fgan_objective(a, b) - direct) <= 1e-12 * (1 + std::abs(direct)));
  }
}

TEST_CASE("a fixed zero discriminator leaves the generator unchanged") {
  const Matrix data = bimodal(1000, 7);
  const Gmm init = gmm_1d({0.3, 0.7}, {-1, 1}, {1, 2});
  GanConfig cfg;
  cfg.iterations = 20;
  cfg.batch_size = 100;
  cfg.fixed_discriminator = true;
  const GanResult res = run_fgan_gmm(data, init, cfg);
  CHECK(dump(to_json(res.model)) == dump(to_json(init)));
  CHECK(!res.diverged);
}

TEST_CASE("f-GAN runs are deterministic and move the model") {
  const Matrix data = bimodal(2000, 8);
  const Gmm init = gmm_1d({0.5, 0.5}, {-1, 1}, {1, 1});
  GanConfig cfg;
  cfg.iterations = 50;
  cfg.batch_size = 200;
  cfg.hidden = {16, 16};
  cfg.target = gmm_1d({0.5, 0.5}, {-5, 5}, {1, 1});
  cfg.eval_every = 10;
  const GanResult a = run_fgan_gmm(data, init, cfg), b = run_fgan_gmm(data, init, cfg);
  CHECK(dump(to_json(a.model)) == dump(to_json(b.model)));
  CHECK(dump(to_json(a.model)) != dump(to_json(init)));
  CHECK(a.trace.size() == b.trace.size());
  for (const auto& r : a.trace) CHECK(std::isfinite(r.i_projection));
}

TEST_CASE("EIM with one component is mode seeking") {
  const Gmm target = gmm_1d({0.5, 0.5}, {-5, 5}, {1, 1});
  const Matrix data = bimodal(10000, 9);
  // Brute-force grid over (mu, sigma^2) of the quadrature KL(q || p).
  auto kl = [&](double mu, double var) {
    const Gmm q = gmm_1d({1.0}, {mu}, {var});
    return integrate(
        [&](double x) {
          const double lq = q.log_density(v1(x));
          return std::exp(lq) * (lq - target.log_density(v1(x)));
        },
        mu - 12 * std::sqrt(var), mu + 12 * std::sqrt(var), 1e-12);
  };
  double best = std::numeric_limits<double>::infinity(), best_mu = 0;
  for (double mu = -7; mu <= 7; mu += 0.25) {
    for (double var = 0.25; var <= 30; var *= 1.25) {
      const double v = kl(mu, var);
      if (v < best) best = v, best_mu = mu;
    }
  }
  CHECK(std::abs(std::abs(best_mu) - 5.0) <= 0.25);

  // A symmetric wide start lies in the basin of the mode-covering local
  // minimum near (0, 17); start off-center.
  EimGmmConfig cfg;
  cfg.iterations = 30;
  cfg.seed = 3;
  const EimResult res = run_eim_gmm(data, gmm_1d({1.0}, {1.5}, {1.0}), cfg);
  const double mu = res.model.component(0).mean()[0], var = res.model.component(0).covariance()(0, 0);
  CHECK(std::abs(std::abs(mu) - 5.0) <= 0.5);
  CHECK(var <= 2.0);
  CHECK(kl(mu, var) <= best + 0.05);
}
