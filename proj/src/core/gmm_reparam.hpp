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

#include <vector>

#include "core/distributions.hpp"

namespace eim {

/// Unconstrained GMM parameters for gradient training: per component the mean
/// and the lower Cholesky factor with log-diagonal, then softmax logits.
class GmmReparam {
 public:
  explicit GmmReparam(const Gmm& gmm);

  int dim() const { return dim_; }
  int num_components() const { return k_; }
  Vector& params() { return params_; }
  const Vector& params() const { return params_; }

  Vector mean(int k) const;
  Matrix cholesky(int k) const;
  Vector weights() const;
  Gmm to_gmm() const;

  struct Batch {
    Matrix x;      // n x d
    Matrix noise;  // n x d standard normals, x = mu_z + L_z u
    std::vector<int> labels;
  };
  Batch sample(std::size_t n, Rng& rng) const;

  /// Reparametrized gradient: grad_x(j, :) = d objective / d x_j.
  void add_pathwise_gradient(const Batch& batch, const Matrix& grad_x, Vector& grad) const;
  /// Score-function gradient w.r.t. the logits for per-sample weights
  /// `coef` (objective contribution already centered by a baseline).
  void add_score_gradient(const Batch& batch, const Vector& coef, Vector& grad) const;
  /// sum_i pi_i KL(q_i || old_i) + KL(pi || pi_old); adds its exact gradient.
  double add_kl_penalty(const Gmm& old, Vector& grad) const;

 private:
  Eigen::Index mean_offset(int k) const { return static_cast<Eigen::Index>(k) * block_; }
  Eigen::Index chol_offset(int k) const { return mean_offset(k) + dim_; }
  Eigen::Index logit_offset() const { return static_cast<Eigen::Index>(k_) * block_; }

  int dim_, k_;
  Eigen::Index block_;
  Vector params_;
};

}  // namespace eim
