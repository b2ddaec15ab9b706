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

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "core/rng.hpp"

namespace eim {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Full-covariance multivariate normal. Immutable; caches the Cholesky factor
/// and the natural parameters (precision Q and precision-mean q = Q mu).
///
/// Sample matrices throughout the library are n x d (one sample per row).
class Gaussian {
 public:
  /// Throws DomainError unless `covariance` is symmetric (1e-10) and its
  /// Cholesky pivots are all >= 1e-12.
  Gaussian(Vector mean, const Matrix& covariance);

  /// Uses `chol` verbatim as the lower Cholesky factor (exact round trips).
  static Gaussian from_cholesky(Vector mean, Matrix chol);
  static Gaussian from_natural(const Matrix& precision, const Vector& precision_mean);

  int dim() const { return static_cast<int>(mean_.size()); }
  const Vector& mean() const { return mean_; }
  const Matrix& covariance() const { return cov_; }
  const Matrix& cholesky() const { return chol_; }
  const Matrix& precision() const { return precision_; }
  const Vector& precision_mean() const { return precision_mean_; }
  double log_det_covariance() const { return log_det_; }
  double entropy() const;

  double log_density(const Vector& x) const;
  /// Row-wise log densities of an n x d matrix.
  Vector log_density(const Matrix& xs) const;

  /// n x d samples: mean + L * standard normal.
  Matrix sample(std::size_t n, Rng& rng) const;

 private:
  Gaussian() = default;
  void finish_from_cholesky();

  Vector mean_;
  Matrix cov_;
  Matrix chol_;
  Matrix precision_;
  Vector precision_mean_;
  double log_det_ = 0.0;
};

class Categorical {
 public:
  /// Entries >= 0 summing to 1 within 1e-10.
  explicit Categorical(Vector probabilities);

  static Categorical uniform(int k);

  int size() const { return static_cast<int>(probs_.size()); }
  const Vector& probabilities() const { return probs_; }
  double operator[](int i) const { return probs_[i]; }

  std::vector<int> sample(std::size_t n, Rng& rng) const;

 private:
  Vector probs_;
};

class Gmm {
 public:
  Gmm(std::vector<Gaussian> components, Categorical weights);

  int dim() const { return components_.front().dim(); }
  int num_components() const { return static_cast<int>(components_.size()); }
  const std::vector<Gaussian>& components() const { return components_; }
  const Gaussian& component(int i) const { return components_[i]; }
  const Categorical& weights() const { return weights_; }

  double log_density(const Vector& x) const;
  Vector log_density(const Matrix& xs) const;
  /// n x K matrix of log(pi_i) + log N(x; mu_i, Sigma_i).
  Matrix joint_log_densities(const Matrix& xs) const;

  struct Samples {
    Matrix x;
    std::vector<int> labels;
  };
  Samples sample(std::size_t n, Rng& rng) const;

 private:
  std::vector<Gaussian> components_;
  Categorical weights_;
};

/// Closed form KL(a || b) in nats, clamped at 0.
double kl_gaussian(const Gaussian& a, const Gaussian& b);
/// sum a_i log(a_i / b_i) with 0 log 0 = 0; DomainError if b_i = 0 < a_i.
double kl_categorical(const Categorical& a, const Categorical& b);
double kl_categorical(const Vector& a, const Vector& b);

/// log sum exp of a vector; -inf inputs are handled.
double log_sum_exp(const Eigen::Ref<const Vector>& v);

/// Log-density floor used when every mixture term underflows.
inline constexpr double kLogDensityFloor = -1.7976931348623157e308;

}  // namespace eim
