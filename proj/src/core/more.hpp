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

#include "core/distributions.hpp"

namespace eim {

/// f(x) = -1/2 x^T F x + f^T x + f0.
struct QuadraticSurrogate {
  Matrix quad;   // F, symmetric
  Vector lin;    // f
  double offset = 0.0;

  QuadraticSurrogate(Matrix quad, Vector lin, double offset);
  static QuadraticSurrogate zero(int dim);

  int dim() const { return static_cast<int>(lin.size()); }
  double operator()(const Vector& x) const;
  QuadraticSurrogate negated() const;
};

struct TrustRegionConfig {
  double epsilon = 0.05;
  double eta_min = 1e-8;
  double eta_max = 1e8;
  /// Relative bracket width at which the dual bisection stops.
  double tolerance = 1e-10;
  /// The EIM objective carries its own KL(q || q_old) term, which shows up as
  /// eta + 1 in the tilt. Disabling it gives plain trust-region MORE.
  bool kl_penalty = true;

  void validate() const;
};

struct DualSolution {
  double eta = 0.0;
  bool constraint_active = false;
  double kl = 0.0;
};

/// Ridge least squares on {x_i x_j (i <= j), x_i, 1}. The ridge is scaled by
/// the mean diagonal of the normal matrix and does not touch the intercept.
QuadraticSurrogate fit_surrogate(const Matrix& samples, const Vector& values, double ridge = 1e-9);

/// Same fit in the whitened frame z = L^{-1} (x - mu) of `frame`, mapped back
/// to raw coordinates.
QuadraticSurrogate fit_surrogate_whitened(const Matrix& samples, const Vector& values, const Gaussian& frame,
                                          double ridge = 1e-9);

struct GaussianUpdate {
  Gaussian distribution;
  DualSolution dual;
  bool accepted = true;
};

/// Trust-region step that maximizes E_q[-phi] - KL(q || old) subject to
/// KL(q || old) <= epsilon, given the quadratic surrogate of the logit phi.
/// When no multiplier gives a positive definite precision the update is
/// rejected and `distribution` is `old`.
GaussianUpdate gaussian_more_update(const Gaussian& old, const QuadraticSurrogate& phi_surrogate,
                                    const TrustRegionConfig& tr);

/// The tilted distribution for a fixed multiplier (throws DomainError if the
/// precision is not positive definite).
Gaussian gaussian_tilt(const Gaussian& old, const QuadraticSurrogate& phi_surrogate, double eta, bool kl_penalty);

/// Dual g(eta) = eta * eps + (eta + 1) log Z(eta); +inf where the tilted
/// precision is not positive definite.
double gaussian_dual(const Gaussian& old, const QuadraticSurrogate& phi_surrogate, const TrustRegionConfig& tr,
                     double eta);

struct CategoricalUpdate {
  Categorical distribution;
  DualSolution dual;
};

/// q_i proportional to old_i * exp(-phi_i / (eta + 1)) under the KL bound.
CategoricalUpdate categorical_more_update(const Categorical& old, const Vector& losses, const TrustRegionConfig& tr);

Vector categorical_tilt(const Categorical& old, const Vector& losses, double eta, bool kl_penalty);
double categorical_dual(const Categorical& old, const Vector& losses, const TrustRegionConfig& tr, double eta);

}  // namespace eim
