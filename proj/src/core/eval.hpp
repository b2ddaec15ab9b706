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
#include <cstdint>
#include <functional>
#include <limits>

#include "core/distributions.hpp"

namespace eim {

class MixtureOfExperts;
struct TaskSpec;

struct McEstimate {
  double value = 0.0;
  double stderr_ = 0.0;
  std::size_t n_used = 0;
  std::size_t n_excluded = 0;
};

using LogDensityFn = std::function<Vector(const Matrix& xs)>;
using ConditionalLogDensityFn = std::function<Vector(const Matrix& contexts, const Matrix& xs)>;

/// (1/n) sum [log q(x_i) - log p(x_i)], x_i ~ q, with its MC standard error.
/// Samples where the target log density is not finite are excluded and counted.
McEstimate mc_i_projection(const Gmm& model, const LogDensityFn& target_log_density, std::size_t n,
                           std::uint64_t seed);
McEstimate mc_i_projection(const Gmm& model, const Gmm& target, std::size_t n, std::uint64_t seed);
/// Conditional version averaged over `contexts` (cycled until n samples).
McEstimate mc_i_projection(const MixtureOfExperts& model, const Matrix& contexts,
                           const ConditionalLogDensityFn& target_log_density, std::size_t n, std::uint64_t seed);

double test_log_likelihood(const Gmm& model, const Matrix& test);
double test_log_likelihood(const MixtureOfExperts& model, const Matrix& contexts, const Matrix& test);

struct TaskMetrics {
  double line_rmse = std::numeric_limits<double>::quiet_NaN();
  double success_rate = std::numeric_limits<double>::quiet_NaN();
  double violation_rate = std::numeric_limits<double>::quiet_NaN();
  std::size_t n = 0;
  std::uint64_t seed = 0;
};

/// Robot task: RMSE of end-effector distance to the target line over n model
/// samples. Throws UnsupportedError when the task has no such metric.
TaskMetrics task_metrics(const Gmm& model, const TaskSpec& task, std::size_t n, std::uint64_t seed);
/// Obstacle task: success and clearance-violation rates of one sampled
/// trajectory per context, contexts cycled from `contexts` until n samples.
TaskMetrics task_metrics(const MixtureOfExperts& model, const TaskSpec& task, const Matrix& contexts, std::size_t n,
                         std::uint64_t seed);
/// Pass-through metrics of given samples (and contexts for conditional tasks).
TaskMetrics sample_metrics(const TaskSpec& task, const Matrix& samples, const Matrix& contexts = Matrix());

}  // namespace eim
