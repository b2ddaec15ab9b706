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

#include <algorithm>
#include <cmath>

#include "core/distributions.hpp"

namespace eim::testing {

// Maximizes sum_i q_i (-phi_i) - KL(q || old) over the simplex with KL(q || old) <= eps by a
// grid that repeatedly zooms in on the best feasible cell.
inline Vector brute_force_categorical(const Vector& old, const Vector& phi, double eps) {
  const int k = static_cast<int>(old.size());
  auto value = [&](const Vector& q) -> double {
    if ((q.array() < 0.0).any()) return -INFINITY;
    double kl = 0.0;
    for (int i = 0; i < k; ++i)
      if (q[i] > 0.0) kl += q[i] * std::log(q[i] / old[i]);
    if (kl > eps) return -INFINITY;
    return -q.dot(phi) - kl;
  };
  Vector center = old;
  double half = 1.0;
  const int m = k == 2 ? 2000 : 400;
  for (int level = 0; level < 16; ++level) {
    Vector best = center;
    double best_v = value(center);
    const double step = 2.0 * half / m;
    if (k == 2) {
      for (int i = 0; i <= m; ++i) {
        Vector q(2);
        q[0] = std::clamp(center[0] - half + i * step, 0.0, 1.0);
        q[1] = 1.0 - q[0];
        const double v = value(q);
        if (v > best_v) best_v = v, best = q;
      }
    } else {
      for (int i = 0; i <= m; ++i) {
        for (int j = 0; j <= m; ++j) {
          Vector q(3);
          q[0] = center[0] - half + i * step;
          q[1] = center[1] - half + j * step;
          q[2] = 1.0 - q[0] - q[1];
          const double v = value(q);
          if (v > best_v) best_v = v, best = q;
        }
      }
    }
    center = best;
    half = 25.0 * step;
  }
  return center;
}

}  // namespace eim::testing
