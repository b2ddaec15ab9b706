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

#include "core/eval.hpp"

#include <cmath>

#include "core/eim_gmm.hpp"
#include "core/errors.hpp"
#include "core/moe.hpp"
#include "core/tasks.hpp"

namespace eim {
namespace {

McEstimate summarize(const Vector& log_q, const Vector& log_p) {
  McEstimate est;
  double sum = 0.0, sum_sq = 0.0;
  for (Eigen::Index i = 0; i < log_q.size(); ++i) {
    if (!std::isfinite(log_p[i]) || log_p[i] <= kLogDensityFloor) {
      ++est.n_excluded;
      continue;
    }
    const double v = log_q[i] - log_p[i];
    sum += v;
    sum_sq += v * v;
    ++est.n_used;
  }
  if (est.n_used == 0) throw NumericalError("mc_i_projection: target log density not finite at any sample");
  const double n = static_cast<double>(est.n_used);
  est.value = sum / n;
  const double var = est.n_used > 1 ? std::max(0.0, (sum_sq - n * est.value * est.value) / (n - 1.0)) : 0.0;
  est.stderr_ = std::sqrt(var / n);
  return est;
}

Matrix cycle_rows(const Matrix& m, std::size_t n) {
  if (m.rows() == 0) throw InputError("evaluation: empty context set");
  Matrix out(static_cast<Eigen::Index>(n), m.cols());
  for (std::size_t i = 0; i < n; ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(i) % m.rows());
  return out;
}

}  // namespace

McEstimate mc_i_projection(const Gmm& model, const LogDensityFn& target_log_density, std::size_t n,
                           std::uint64_t seed) {
  if (n == 0) throw InputError("mc_i_projection: n must be positive");
  if (!target_log_density) throw UnsupportedError("mc_i_projection: no target density");
  Rng rng(seed, stream::kEvaluation);
  const Matrix xs = model.sample(n, rng).x;
  return summarize(model.log_density(xs), target_log_density(xs));
}

McEstimate mc_i_projection(const Gmm& model, const Gmm& target, std::size_t n, std::uint64_t seed) {
  if (model.dim() != target.dim()) throw InputError("mc_i_projection: dimension mismatch");
  return mc_i_projection(model, [&target](const Matrix& xs) { return target.log_density(xs); }, n, seed);
}

McEstimate mc_i_projection(const MixtureOfExperts& model, const Matrix& contexts,
                           const ConditionalLogDensityFn& target_log_density, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw InputError("mc_i_projection: n must be positive");
  if (!target_log_density) throw UnsupportedError("mc_i_projection: no target density");
  Rng rng(seed, stream::kEvaluation);
  const Matrix ctx = cycle_rows(contexts, n);
  const Matrix xs = model.sample(ctx, rng).x;
  return summarize(model.log_density(ctx, xs), target_log_density(ctx, xs));
}

double test_log_likelihood(const Gmm& model, const Matrix& test) {
  if (test.rows() == 0) throw InputError("test_log_likelihood: empty test set");
  return mean_log_likelihood(model, test);
}

double test_log_likelihood(const MixtureOfExperts& model, const Matrix& contexts, const Matrix& test) {
  if (test.rows() == 0) throw InputError("test_log_likelihood: empty test set");
  return model.log_density(contexts, test).mean();
}

TaskMetrics sample_metrics(const TaskSpec& task, const Matrix& samples, const Matrix& contexts) {
  TaskMetrics m;
  m.n = static_cast<std::size_t>(samples.rows());
  if (samples.rows() == 0) throw InputError("task metrics: no samples");
  if (task.line_distance) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < samples.rows(); ++i) {
      const double dist = task.line_distance(samples.row(i).transpose());
      s += dist * dist;
    }
    m.line_rmse = std::sqrt(s / static_cast<double>(samples.rows()));
  } else if (task.success) {
    if (contexts.rows() != samples.rows()) throw InputError("task metrics: contexts must align with samples");
    std::size_t ok = 0, violated = 0;
    for (Eigen::Index i = 0; i < samples.rows(); ++i) {
      const Vector x = samples.row(i).transpose(), c = contexts.row(i).transpose();
      ok += task.success(x, c) ? 1 : 0;
      if (task.features && task.features->eval(x, c).minCoeff() < 0.0) ++violated;
    }
    m.success_rate = static_cast<double>(ok) / static_cast<double>(m.n);
    if (task.features) m.violation_rate = static_cast<double>(violated) / static_cast<double>(m.n);
  } else {
    throw UnsupportedError("task '" + task.name + "' has no sample metric");
  }
  return m;
}

TaskMetrics task_metrics(const Gmm& model, const TaskSpec& task, std::size_t n, std::uint64_t seed) {
  if (!task.line_distance) throw UnsupportedError("task '" + task.name + "' has no line-distance metric");
  if (n == 0) throw InputError("task_metrics: n must be positive");
  Rng rng(seed, stream::kEvaluation);
  TaskMetrics m = sample_metrics(task, model.sample(n, rng).x);
  m.seed = seed;
  return m;
}

TaskMetrics task_metrics(const MixtureOfExperts& model, const TaskSpec& task, const Matrix& contexts, std::size_t n,
                         std::uint64_t seed) {
  if (!task.success) throw UnsupportedError("task '" + task.name + "' has no success predicate");
  if (n == 0) throw InputError("task_metrics: n must be positive");
  Rng rng(seed, stream::kEvaluation);
  const Matrix ctx = cycle_rows(contexts, n);
  TaskMetrics m = sample_metrics(task, model.sample(ctx, rng).x, ctx);
  m.seed = seed;
  return m;
}

}  // namespace eim
