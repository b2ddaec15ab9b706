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

#pragma once

#include <cmath>
#include <functional>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "core/distributions.hpp"

namespace eim::testing {

/// Adaptive Gauss-Kronrod on [a, b].
inline double integrate(const std::function<double(double)>& f, double a, double b, double tol = 1e-12) {
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 15, tol);
}

inline Vector v1(double x) { return Vector::Constant(1, x); }

inline double normal_pdf(double x, double mean, double var) {
  return std::exp(-0.5 * (x - mean) * (x - mean) / var) / std::sqrt(2.0 * M_PI * var);
}

/// Central difference of a scalar function of a vector, entry i.
inline double central_difference(const std::function<double(const Vector&)>& f, Vector x, Eigen::Index i,
                                 double h = 1e-5) {
  const double x0 = x[i];
  x[i] = x0 + h;
  const double up = f(x);
  x[i] = x0 - h;
  const double down = f(x);
  return (up - down) / (2.0 * h);
}

inline Vector numeric_gradient(const std::function<double(const Vector&)>& f, const Vector& x, double h = 1e-5) {
  Vector g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) g[i] = central_difference(f, x, i, h);
  return g;
}

/// max_i |a_i - b_i| / max(|b_i|, floor).
inline double max_relative_error(const Vector& a, const Vector& b, double floor = 1e-3) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i)
    worst = std::max(worst, std::abs(a[i] - b[i]) / std::max(std::abs(b[i]), floor));
  return worst;
}

/// Vector-level relative error ||a - b|| / max(||b||, floor).
inline double relative_error(const Vector& a, const Vector& b, double floor = 1e-8) {
  return (a - b).norm() / std::max(b.norm(), floor);
}

inline Matrix random_spd(int d, Rng& rng, double ridge = 0.5) {
  Matrix a(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) a(i, j) = rng.normal();
  return a * a.transpose() / d + ridge * Matrix::Identity(d, d);
}

inline Gmm gmm_1d(const std::vector<double>& w, const std::vector<double>& means, const std::vector<double>& vars) {
  std::vector<Gaussian> cs;
  for (std::size_t i = 0; i < w.size(); ++i)
    cs.emplace_back(Vector::Constant(1, means[i]), Matrix::Constant(1, 1, vars[i]));
  Vector wv(static_cast<Eigen::Index>(w.size()));
  for (std::size_t i = 0; i < w.size(); ++i) wv[static_cast<Eigen::Index>(i)] = w[i];
  return Gmm(std::move(cs), Categorical(wv));
}

}  // namespace eim::testing
