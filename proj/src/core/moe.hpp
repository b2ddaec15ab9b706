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

#include <cstdint>
#include <vector>

#include "core/nn.hpp"

namespace eim {

/// Number of raw covariance outputs for dimension d: lower triangle, row
/// major, diagonal entries stored as logs.
inline int cholesky_raw_width(int d) { return d * (d + 1) / 2; }
Matrix cholesky_from_raw(const Eigen::Ref<const Vector>& raw, int d);

/// Gaussian mixture of experts q(x | y) = sum_i g_i(y) N(x; mu_i(y), L_i(y) L_i(y)^T).
/// The gating network maps y to K softmax logits; expert i is one network
/// mapping y to [mu_i(y), raw Cholesky entries].
///
/// Contexts and samples are n x width row matrices.
class MixtureOfExperts {
 public:
  MixtureOfExperts(int context_dim, int dim, int components, const std::vector<int>& hidden, Activation act);
  MixtureOfExperts(Mlp gating, std::vector<Mlp> experts, int context_dim, int dim);

  int dim() const { return dim_; }
  int context_dim() const { return context_dim_; }
  int num_components() const { return static_cast<int>(experts_.size()); }
  int expert_output_width() const { return dim_ + cholesky_raw_width(dim_); }

  Mlp& gating() { return gating_; }
  const Mlp& gating() const { return gating_; }
  Mlp& expert(int k) { return experts_[k]; }
  const Mlp& expert(int k) const { return experts_[k]; }

  /// n x K gating probabilities.
  Matrix gating_probs(const Matrix& contexts) const;
  /// Expert k at every context row.
  std::vector<Gaussian> expert_gaussians(int k, const Matrix& contexts) const;
  Vector log_density(const Matrix& contexts, const Matrix& xs) const;
  /// n x K matrix of log g_i(y) + log N(x; mu_i(y), Sigma_i(y)).
  Matrix joint_log_densities(const Matrix& contexts, const Matrix& xs) const;

  struct Samples {
    Matrix x;
    std::vector<int> labels;
  };
  /// One sample per context row.
  Samples sample(const Matrix& contexts, Rng& rng) const;

  void check_contexts(const Matrix& contexts) const;

 private:
  int context_dim_, dim_;
  Mlp gating_;
  std::vector<Mlp> experts_;
};

/// Random networks with small output layers; expert output biases start at
/// k-means++ picks of the data with the data's per-dimension spread, gating
/// starts uniform.
MixtureOfExperts init_moe_from_data(const Matrix& contexts, const Matrix& xs, int components,
                                    const std::vector<int>& hidden, Activation act, std::uint64_t seed);

}  // namespace eim
