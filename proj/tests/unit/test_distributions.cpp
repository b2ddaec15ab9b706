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

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>

#include "core/distributions.hpp"
#include "core/errors.hpp"
#include "support/oracles.hpp"

using namespace eim;
using namespace eim::testing;

namespace {
Gaussian g1(double mean, double var) { return Gaussian(Vector::Constant(1, mean), Matrix::Constant(1, 1, var)); }
}  // namespace

TEST_CASE("gaussian log density examples") {
  CHECK(g1(0, 1).log_density(v1(0)) == doctest::Approx(-0.918938533204673).epsilon(1e-12));
  CHECK(g1(0, 4).log_density(v1(2.0)) ==
        doctest::Approx(-0.5 * std::log(8 * M_PI) - 0.5).epsilon(1e-12));
  Rng rng(1);
  const Matrix cov = random_spd(3, rng);
  const Vector mu = Vector::Random(3);
  const Gaussian g(mu, cov);
  CHECK(g.log_density(mu) == doctest::Approx(-0.5 * std::log((2 * M_PI * cov).determinant())).epsilon(1e-12));
  CHECK_THROWS_AS(g.log_density(Vector(Vector::Zero(2))), InputError);
}

TEST_CASE("gaussian rejects degenerate covariances") {
  CHECK_THROWS_AS(g1(0, 0.0), DomainError);
  Matrix asym(2, 2);
  asym << 1, 0.5, 0.1, 1;
  CHECK_THROWS_AS(Gaussian(Vector::Zero(2), asym), DomainError);
}

TEST_CASE("natural parameter round trip") {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const int d = 1 + trial % 5;
    const Matrix cov = random_spd(d, rng, 0.1);
    Vector mu(d);
    for (int i = 0; i < d; ++i) mu[i] = rng.normal();
    const Gaussian g(mu, cov);
    const Gaussian back = Gaussian::from_natural(g.precision(), g.precision_mean());
    CHECK(relative_error(back.mean(), mu) <= 1e-8);
    CHECK((back.covariance() - cov).norm() / cov.norm() <= 1e-8);
  }
}

TEST_CASE("gmm log density examples") {
  const Gmm one = gmm_1d({1.0}, {0.3}, {2.0});
  CHECK(one.log_density(v1(1.1)) == doctest::Approx(g1(0.3, 2.0).log_density(v1(1.1))));
  const Gmm sym = gmm_1d({0.5, 0.5}, {-1, 1}, {1, 1});
  CHECK(sym.log_density(v1(0)) ==
        doctest::Approx(std::log(std::exp(-0.5) * 2 * 0.5) - 0.5 * std::log(2 * M_PI)).epsilon(1e-12));
  const Gmm first = gmm_1d({1.0, 0.0}, {-1, 1}, {1, 1});
  CHECK(first.log_density(v1(0.7)) == doctest::Approx(g1(-1, 1).log_density(v1(0.7))));
  CHECK_THROWS_AS(sym.log_density(Vector(Vector::Zero(2))), InputError);
}

TEST_CASE("gmm log density stays finite far from every component") {
  const Gmm sym = gmm_1d({0.5, 0.5}, {-1, 1}, {1e-4, 1e-4});
  const double v = sym.log_density(v1(1e6));
  CHECK(std::isfinite(v));
  CHECK(v < -1e15);
  CHECK(v >= kLogDensityFloor);
}

TEST_CASE("gmm log density is continuous") {
  Rng rng(3);
  const Gmm m = gmm_1d({0.2, 0.5, 0.3}, {-2, 0, 3}, {0.5, 1, 2});
  for (int i = 0; i < 50; ++i) {
    const double x = -6 + 12 * rng.uniform();
    const double h = 1e-6;
    const double a = m.log_density(v1(x)), b = m.log_density(v1(x + h));
    // |d/dx log p| is bounded by |x - mu| / var over the components here.
    CHECK(std::abs(b - a) / h < 20.0);
  }
}

TEST_CASE("sampling examples") {
  Rng rng(11);
  const Matrix near = g1(2.5, 1e-12).sample(100, rng);
  CHECK((near.array() - 2.5).abs().maxCoeff() < 1e-5);

  const Gmm first = gmm_1d({1.0, 0.0}, {-1, 1}, {1, 1});
  const auto s = first.sample(500, rng);
  for (int l : s.labels) CHECK(l == 0);

  const Matrix xs = g1(0, 1).sample(100000, rng);
  CHECK(std::abs(xs.mean()) <= 0.02);
  CHECK_THROWS_AS(g1(0, 1).sample(0, rng), InputError);
}

TEST_CASE("sampling is deterministic per seed") {
  const Gmm m = gmm_1d({0.3, 0.7}, {-1, 2}, {1, 0.5});
  Rng a(42, 3), b(42, 3), c(43, 3);
  const auto sa = m.sample(100, a), sb = m.sample(100, b), sc = m.sample(100, c);
  CHECK(sa.x == sb.x);
  CHECK(sa.labels == sb.labels);
  CHECK(sa.x != sc.x);
}

TEST_CASE("gmm sample histogram matches the density") {
  const Gmm m = gmm_1d({0.3, 0.7}, {-2, 1.5}, {0.6, 1.2});
  Rng rng(5);
  const int n = 100000, bins = 50;
  const Matrix xs = m.sample(n, rng).x;
  const double lo = -5, hi = 5, width = (hi - lo) / bins;
  std::vector<double> counts(bins + 2, 0.0);
  for (int i = 0; i < n; ++i) {
    const double x = xs(i, 0);
    const int b = x < lo ? 0 : x >= hi ? bins + 1 : 1 + static_cast<int>((x - lo) / width);
    counts[b] += 1;
  }
  auto cdf = [&](double x) {
    double c = 0.0;
    for (int k = 0; k < 2; ++k) {
      boost::math::normal_distribution<> nd(m.component(k).mean()[0], std::sqrt(m.component(k).covariance()(0, 0)));
      c += m.weights()[k] * boost::math::cdf(nd, x);
    }
    return c;
  };
  double chi2 = 0.0;
  int used = 0;
  for (int b = 0; b < bins + 2; ++b) {
    const double a = b == 0 ? -INFINITY : lo + (b - 1) * width;
    const double e = b == bins + 1 ? INFINITY : lo + b * width;
    const double p = (std::isinf(e) ? 1.0 : cdf(e)) - (std::isinf(a) ? 0.0 : cdf(a));
    const double expected = p * n;
    if (expected < 5) continue;
    chi2 += (counts[b] - expected) * (counts[b] - expected) / expected;
    ++used;
  }
  boost::math::chi_squared_distribution<> dist(used - 1);
  CHECK(boost::math::cdf(boost::math::complement(dist, chi2)) > 0.001);
}

TEST_CASE("kl gaussian examples and quadrature") {
  CHECK(kl_gaussian(g1(0.3, 2), g1(0.3, 2)) == doctest::Approx(0.0));
  CHECK(kl_gaussian(g1(1, 1), g1(0, 1)) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(kl_gaussian(g1(0, 2), g1(0, 1)) == doctest::Approx(0.5 * (2 - 1 - std::log(2.0))).epsilon(1e-12));
  Rng rng(9);
  for (int i = 0; i < 20; ++i) {
    const double ma = rng.normal(), mb = rng.normal(), va = 0.3 + rng.uniform() * 2, vb = 0.3 + rng.uniform() * 2;
    const double quad = integrate(
        [&](double x) {
          const double la = std::log(normal_pdf(x, ma, va));
          const double lb = -0.5 * (x - mb) * (x - mb) / vb - 0.5 * std::log(2 * M_PI * vb);
          return std::exp(la) * (la - lb);
        },
        ma - 20 * std::sqrt(va), ma + 20 * std::sqrt(va));
    CHECK(std::abs(kl_gaussian(g1(ma, va), g1(mb, vb)) - quad) <= 1e-5);
  }
  CHECK_THROWS_AS(kl_gaussian(g1(0, 1), Gaussian(Vector::Zero(2), Matrix::Identity(2, 2))), InputError);
}

TEST_CASE("kl categorical examples") {
  Vector h(2), one(2), a(2);
  h << 0.5, 0.5;
  one << 1, 0;
  a << 0.9, 0.1;
  CHECK(kl_categorical(h, h) == doctest::Approx(0.0));
  CHECK(kl_categorical(one, h) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(kl_categorical(a, h) == doctest::Approx(0.9 * std::log(1.8) + 0.1 * std::log(0.2)).epsilon(1e-12));
  CHECK(kl_categorical(a, h) == doctest::Approx(0.3681).epsilon(1e-4));
  CHECK_THROWS_AS(kl_categorical(h, one), DomainError);
  Vector three(3);
  three << 0.2, 0.3, 0.5;
  CHECK_THROWS_AS(kl_categorical(h, three), InputError);
}
