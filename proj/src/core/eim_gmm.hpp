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
#include <string>
#include <vector>

#include "core/more.hpp"
#include "core/ratio_estimator.hpp"

namespace eim {

enum class EimVariant {
  kEim,
  kNoKl,       // plain trust-region MORE, no eta + 1
  kJoint,      // Adam on all parameters of the EIM bound
  kJointNoKl,  // Adam on E_q[phi] alone
};

std::string to_string(EimVariant v);

/// Settings for the gradient-based (joint) ablations.
struct JointConfig {
  AdamConfig adam{1e-2, 0.9, 0.999, 1e-8};
  int steps_per_iteration = 10;
  int batch_size = 1000;
  double baseline_decay = 0.9;
};

struct EimGmmConfig {
  int iterations = 200;
  int samples_per_component = 1000;
  TrustRegionConfig component_tr;
  TrustRegionConfig coefficient_tr;
  TrainConfig ratio;
  /// Epoch budget (and patience cap) of the warm-started refit done in every
  /// iteration after the first.
  int ratio_epochs_per_iteration = 5;
  double surrogate_ridge = 1e-9;
  /// Draw separate samples for the coefficient losses instead of reusing the
  /// component samples.
  bool resample_coefficients = false;
  bool update_coefficients = true;
  bool update_components = true;
  std::uint64_t seed = 0;
  std::optional<FeatureMap> features;
  JointConfig joint;

  /// Trace metrics: MC I-projection against an analytic target when given,
  /// otherwise mean log-likelihood of `test_data` when non-empty.
  std::optional<Gmm> target;
  Matrix test_data;
  int eval_samples = 1000;
  int eval_every = 1;

  int checkpoint_every = 0;
  std::function<void(int iteration, const Gmm& model)> checkpoint;

  void validate() const;
};

struct IterationRecord {
  int iteration = 0;
  std::vector<double> expected_logits;
  std::vector<double> coefficient_losses;
  std::vector<double> component_kls;
  std::vector<int> component_accepted;
  std::vector<double> component_etas;
  double coefficient_kl = 0.0;
  double coefficient_eta = 0.0;
  double ratio_validation_bce = 0.0;
  double i_projection = std::numeric_limits<double>::quiet_NaN();
  double i_projection_stderr = std::numeric_limits<double>::quiet_NaN();
  double test_log_likelihood = std::numeric_limits<double>::quiet_NaN();
  double wall_seconds = 0.0;
};

/// Everything the closed-form M-step saw in one iteration.
struct IterationDetail {
  int iteration;
  const Gmm& old_model;
  const RatioEstimator& ratio;
  const std::vector<Matrix>& component_samples;
  const std::vector<Vector>& component_logits;
  const Gmm& new_model;
};

struct EimResult {
  Gmm model;
  std::vector<IterationRecord> trace;
  std::optional<RatioEstimator> ratio;
  int rejected_updates = 0;
};

EimResult run_eim_gmm(const Matrix& data, const Gmm& init, const EimGmmConfig& cfg,
                      const std::function<void(const IterationDetail&)>& observer = {});

EimResult run_eim_ablation(const Matrix& data, const Gmm& init, const EimGmmConfig& cfg, EimVariant variant,
                           const std::function<void(const IterationDetail&)>& observer = {});

/// k-means++ seeded means, the data covariance for every component, uniform
/// weights.
Gmm init_gmm_from_data(const Matrix& data, int components, std::uint64_t seed);

/// Long-format trace: iteration,metric,index,value (timings excluded so that
/// seeded reruns are byte-identical).
void write_trace_csv(const std::vector<IterationRecord>& trace, std::ostream& os);
void write_timing_csv(const std::vector<IterationRecord>& trace, std::ostream& os);

/// Integrand of the bound sum_z int q(x, z) log(q(x, z) / (p(x) q_old(z | x))) dx
/// at the rows of `xs`, given log p there. The bound exceeds KL(q || p) by
/// E_q[KL(q(z | x) || q_old(z | x))] and is tight at q = q_old.
Vector upper_bound_integrand(const Gmm& q, const Gmm& q_old, const Matrix& xs, const Vector& log_p);

/// Mean of `log_density` over rows; shared by the trace and evaluation code.
double mean_log_likelihood(const Gmm& model, const Matrix& data);

}  // namespace eim
