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
#include <string>
#include <vector>

#include "core/distributions.hpp"

namespace eim {

struct EmConfig {
  int iterations = 100;
  /// Added to every covariance diagonal in each M-step.
  double covariance_floor = 1e-6;
  std::uint64_t seed = 0;
};

struct EmEvent {
  int iteration;
  int component;
  std::string what;
};

struct EmResult {
  Gmm model;
  /// Mean training log-likelihood before the first and after every iteration.
  std::vector<double> log_likelihood;
  std::vector<EmEvent> events;
};

/// n x K responsibilities of `model` for the rows of `data`.
Matrix responsibilities(const Gmm& model, const Matrix& data);

EmResult run_em_gmm(const Matrix& data, const Gmm& init, const EmConfig& cfg);

}  // namespace eim
