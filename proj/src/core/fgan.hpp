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
#include <limits>
#include <optional>
#include <vector>

#include "core/nn.hpp"

namespace eim {

struct GanConfig {
  int iterations = 10000;
  AdamConfig generator{1e-3, 0.9, 0.999, 1e-8};
  AdamConfig discriminator{1e-3, 0.9, 0.999, 1e-8};
  int generator_steps = 1;
  int discriminator_steps = 1;
  int batch_size = 1000;
  std::vector<int> hidden = {50, 50, 50};
  Activation activation = Activation::kRelu;
  double l2 = 0.0;
  double baseline_decay = 0.9;
  /// Keep the discriminator at V = 0 (no discriminator training).
  bool fixed_discriminator = false;
  std::uint64_t seed = 0;

  std::optional<Gmm> target;
  int eval_every = 100;
  int eval_samples = 1000;
  /// Abort once the I-projection estimate exceeds `divergence_factor` times
  /// the initial value for `divergence_patience` consecutive evaluations.
  double divergence_factor = 10.0;
  int divergence_patience = 50;

  void validate() const;
};

struct GanRecord {
  int iteration = 0;
  double objective = 0.0;
  double i_projection = std::numeric_limits<double>::quiet_NaN();
  double i_projection_stderr = std::numeric_limits<double>::quiet_NaN();
};

struct GanResult {
  Gmm model;
  std::vector<GanRecord> trace;
  bool diverged = false;
};

/// -E_p[exp(-V)] + E_q[1 - V] written through the generic form
/// E_p[g(V)] - E_q[f*(g(V))] with g(v) = -exp(-v), f*(t) = -1 - log(-t).
double fgan_objective(const Vector& v_p, const Vector& v_q);
/// E_p[f'(r)] - E_q[f'(r) r - f(r)] with f(u) = -log u and r = exp(r_l).
double bgan_objective(const Vector& rl_p, const Vector& rl_q);

GanResult run_fgan_gmm(const Matrix& data, const Gmm& init, const GanConfig& cfg);

}  // namespace eim
