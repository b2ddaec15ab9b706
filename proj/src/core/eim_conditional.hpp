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
#include <functional>
#include <iosfwd>
#include <limits>
#include <optional>
#include <vector>

#include "core/moe.hpp"
#include "core/ratio_estimator.hpp"

namespace eim {

struct CondEimConfig {
  int iterations = 100;
  AdamConfig gating_adam{1e-3, 0.5, 0.999, 1e-8};
  AdamConfig component_adam{1e-3, 0.5, 0.999, 1e-8};
  int epochs = 10;
  /// Context rows per mini-batch in the gating and component steps.
  int batch_size = 100;
  /// Component samples per context for the expected logits of the gating step.
  int samples_per_context = 10;
  /// Update the gating before the components (the marginal algorithm's order).
  bool gating_first = true;
  /// Gating objective weight g_i(y) applied inside the context expectation;
  /// false uses the context-averaged expected logit per component instead.
  bool weight_inside = true;
  TrainConfig ratio{{64, 64}, Activation::kRelu, AdamConfig{}, 1000, 200, 1e-3, 0.2, 10};
  int ratio_epochs_per_iteration = 5;
  std::optional<FeatureMap> features;
  std::uint64_t seed = 0;

  Matrix test_contexts, test_samples;
  int eval_every = 1;
  /// Called after every iteration with the current model.
  std::function<void(int iteration, const MixtureOfExperts& model)> observer;

  void validate() const;
};

struct MoeIterationRecord {
  int iteration = 0;
  double gating_loss = 0.0;
  double expected_gating_kl = 0.0;
  std::vector<double> component_losses;
  std::vector<double> component_kls;
  double ratio_validation_bce = std::numeric_limits<double>::quiet_NaN();
  double train_log_likelihood = std::numeric_limits<double>::quiet_NaN();
  double test_log_likelihood = std::numeric_limits<double>::quiet_NaN();
  double wall_seconds = 0.0;
};

struct MoeResult {
  MixtureOfExperts model;
  std::vector<MoeIterationRecord> trace;
  std::optional<RatioEstimator> ratio;
};

/// mean_j [ sum_i g_i(y_j) l_ji + KL(g(y_j) || old_j) ] with l the expected
/// logits (n x K) and old the previous gating probabilities (n x K). Adds the
/// gradient w.r.t. the gating parameters when `grad` is non-null.
double gating_loss(const MixtureOfExperts& m, const Matrix& contexts, const Matrix& expected_logits,
                   const Matrix& old_probs, Vector* grad);

/// Per-context state of one expert of the previous model.
struct OldExpert {
  std::vector<Vector> mean;
  std::vector<Matrix> precision;
  std::vector<double> log_det;
  static OldExpert from(const std::vector<Gaussian>& gs);
};

/// (1/n) sum_j w_j [ phi(mu_k(y_j) + L_k(y_j) u_j, y_j) + KL(q_k(.|y_j) || old_j) ]
/// for fixed noise u (n x d). Adds the gradient w.r.t. expert k's network.
double component_loss(const MixtureOfExperts& m, int k, const Matrix& contexts, const Matrix& noise,
                      const Vector& weights, const OldExpert& old, const std::vector<Eigen::Index>& rows,
                      const RatioEstimator& ratio, Vector* grad);

/// Negative mean conditional log-likelihood. `grads` (if non-null) receives
/// the gradient for the gating network followed by each expert network.
double ml_loss(const MixtureOfExperts& m, const Matrix& contexts, const Matrix& xs, std::vector<Vector>* grads);

MoeResult run_eim_moe(const Matrix& contexts, const Matrix& xs, const MixtureOfExperts& init,
                      const CondEimConfig& cfg);

struct MlMoeConfig {
  int iterations = 100;  // epochs
  AdamConfig adam{1e-3, 0.9, 0.999, 1e-8};
  int batch_size = 100;
  std::uint64_t seed = 0;
  Matrix test_contexts, test_samples;
  int eval_every = 1;
  std::function<void(int iteration, const MixtureOfExperts& model)> observer;
  void validate() const;
};

MoeResult run_ml_moe(const Matrix& contexts, const Matrix& xs, const MixtureOfExperts& init, const MlMoeConfig& cfg);

void write_moe_trace_csv(const std::vector<MoeIterationRecord>& trace, std::ostream& os);

}  // namespace eim
