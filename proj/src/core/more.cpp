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

#include "core/more.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <string>

#include "core/errors.hpp"

namespace eim {
namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;
constexpr double kInf = std::numeric_limits<double>::infinity();

// Smallest multiplier in [lo, hi] for which `feasible` holds, assuming
// feasibility is monotone in eta. Log-grid bracketing, then bisection in log eta.
template <class Feasible>
std::optional<double> smallest_feasible(Feasible&& feasible, double lo, double hi, double tol) {
  if (feasible(lo)) return lo;
  if (!feasible(hi)) return std::nullopt;
  double a = lo, b = lo;
  while (true) {
    b = std::min(hi, b * 10.0);
    if (feasible(b)) break;
    a = b;
  }
  while (std::log(b) - std::log(a) > tol) {
    const double mid = std::sqrt(a * b);
    if (feasible(mid)) b = mid;
    else a = mid;
  }
  return b;
}

double divisor(double eta, bool kl_penalty) { return kl_penalty ? eta + 1.0 : eta; }

// log-partition of exp(-1/2 x'Qx + q'x): 1/2 q'Q^{-1}q - 1/2 log|Q| + d/2 log(2 pi)
std::optional<double> log_partition(const Matrix& precision, const Vector& precision_mean) {
  Eigen::LLT<Matrix> llt(precision);
  if (llt.info() != Eigen::Success) return std::nullopt;
  const Matrix l = llt.matrixL();
  for (Eigen::Index j = 0; j < l.rows(); ++j) {
    if (!(l(j, j) > 0.0)) return std::nullopt;
  }
  const Vector w = llt.matrixL().solve(precision_mean);
  return 0.5 * w.squaredNorm() - l.diagonal().array().log().sum() + 0.5 * precision.rows() * kLog2Pi;
}

struct Tilted {
  Matrix precision;
  Vector precision_mean;
};

Tilted tilt_natural(const Gaussian& old, const QuadraticSurrogate& phi, double eta, bool kl_penalty) {
  const double div = divisor(eta, kl_penalty);
  // maximize f = -phi: F_f = -F_phi, f_f = -f_phi
  return {old.precision() - phi.quad / div, old.precision_mean() - phi.lin / div};
}

std::optional<Gaussian> try_tilt(const Gaussian& old, const QuadraticSurrogate& phi, double eta, bool kl_penalty) {
  const Tilted t = tilt_natural(old, phi, eta, kl_penalty);
  if (!log_partition(t.precision, t.precision_mean)) return std::nullopt;
  try {
    return Gaussian::from_natural(t.precision, t.precision_mean);
  } catch (const DomainError&) {
    return std::nullopt;
  }
}

Vector quadratic_features(const Eigen::Ref<const Vector>& x) {
  const Eigen::Index d = x.size();
  Vector phi(d * (d + 1) / 2 + d + 1);
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = i; j < d; ++j) phi[k++] = x[i] * x[j];
  }
  for (Eigen::Index i = 0; i < d; ++i) phi[k++] = x[i];
  phi[k] = 1.0;
  return phi;
}

}  // namespace

QuadraticSurrogate::QuadraticSurrogate(Matrix quad_, Vector lin_, double offset_)
    : quad(0.5 * (quad_ + quad_.transpose())), lin(std::move(lin_)), offset(offset_) {
  if (quad.rows() != lin.size() || quad.cols() != lin.size()) throw InputError("QuadraticSurrogate: shape mismatch");
}

QuadraticSurrogate QuadraticSurrogate::zero(int dim) {
  return QuadraticSurrogate(Matrix::Zero(dim, dim), Vector::Zero(dim), 0.0);
}

double QuadraticSurrogate::operator()(const Vector& x) const {
  return -0.5 * x.dot(quad * x) + lin.dot(x) + offset;
}

QuadraticSurrogate QuadraticSurrogate::negated() const { return QuadraticSurrogate(-quad, -lin, -offset); }

void TrustRegionConfig::validate() const {
  if (!(epsilon > 0.0)) throw ConfigError("trust region epsilon must be positive");
  if (!(eta_min > 0.0 && eta_max > eta_min)) throw ConfigError("trust region eta bounds must satisfy 0 < min < max");
  if (!(tolerance > 0.0)) throw ConfigError("trust region tolerance must be positive");
}

QuadraticSurrogate fit_surrogate(const Matrix& samples, const Vector& values, double ridge) {
  const Eigen::Index n = samples.rows(), d = samples.cols();
  const Eigen::Index p = d * (d + 1) / 2 + d + 1;
  if (values.size() != n) throw InputError("fit_surrogate: values/sample count mismatch");
  if (n < p) {
    throw InputError("fit_surrogate: need at least " + std::to_string(p) + " samples for a " + std::to_string(d) +
                     "-dimensional quadratic, got " + std::to_string(n));
  }
  Matrix design(n, p);
  for (Eigen::Index r = 0; r < n; ++r) design.row(r) = quadratic_features(samples.row(r).transpose()).transpose();

  Matrix normal = design.transpose() * design;
  const double scale = normal.diagonal().head(p - 1).mean();
  if (scale > 0.0) normal.diagonal().head(p - 1).array() += ridge * scale;
  Eigen::LDLT<Matrix> ldlt(normal);
  const Vector pivots = ldlt.vectorD();
  if (ldlt.info() != Eigen::Success || !(pivots.minCoeff() > 1e-13 * pivots.cwiseAbs().maxCoeff())) {
    throw NumericalError("fit_surrogate: design matrix is rank deficient");
  }
  const Vector beta = ldlt.solve(design.transpose() * values);
  if (!beta.allFinite()) throw NumericalError("fit_surrogate: non-finite coefficients");

  Matrix quad(d, d);
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = i; j < d; ++j, ++k) {
      if (i == j) {
        quad(i, i) = -2.0 * beta[k];
      } else {
        quad(i, j) = quad(j, i) = -beta[k];
      }
    }
  }
  return QuadraticSurrogate(quad, beta.segment(k, d), beta[p - 1]);
}

QuadraticSurrogate fit_surrogate_whitened(const Matrix& samples, const Vector& values, const Gaussian& frame,
                                          double ridge) {
  if (samples.cols() != frame.dim()) throw InputError("fit_surrogate_whitened: dimension mismatch");
  const auto lower = frame.cholesky().triangularView<Eigen::Lower>();
  Matrix z = (samples.rowwise() - frame.mean().transpose()).transpose();
  lower.solveInPlace(z);
  const QuadraticSurrogate w = fit_surrogate(z.transpose(), values, ridge);

  // z = L^{-1}(x - mu): F = L^{-T} A L^{-1}, g = L^{-T} b
  const Eigen::Index d = frame.dim();
  const Matrix linv = lower.solve(Matrix::Identity(d, d));
  const Matrix quad = linv.transpose() * w.quad * linv;
  const Vector g = linv.transpose() * w.lin;
  const Vector& mu = frame.mean();
  return QuadraticSurrogate(quad, quad * mu + g, -0.5 * mu.dot(quad * mu) - g.dot(mu) + w.offset);
}

Gaussian gaussian_tilt(const Gaussian& old, const QuadraticSurrogate& phi, double eta, bool kl_penalty) {
  const Tilted t = tilt_natural(old, phi, eta, kl_penalty);
  return Gaussian::from_natural(t.precision, t.precision_mean);
}

double gaussian_dual(const Gaussian& old, const QuadraticSurrogate& phi, const TrustRegionConfig& tr, double eta) {
  const Tilted t = tilt_natural(old, phi, eta, tr.kl_penalty);
  const auto a_new = log_partition(t.precision, t.precision_mean);
  if (!a_new) return kInf;
  const double a_old = *log_partition(old.precision(), old.precision_mean());
  const double div = divisor(eta, tr.kl_penalty);
  // f0 of f = -phi enters log Z as -offset / div
  return eta * tr.epsilon + div * (*a_new - a_old) - phi.offset;
}

GaussianUpdate gaussian_more_update(const Gaussian& old, const QuadraticSurrogate& phi, const TrustRegionConfig& tr) {
  tr.validate();
  if (phi.dim() != old.dim()) throw InputError("gaussian_more_update: surrogate dimension mismatch");

  auto kl_at = [&](double eta) -> std::optional<double> {
    auto g = try_tilt(old, phi, eta, tr.kl_penalty);
    if (!g) return std::nullopt;
    return kl_gaussian(*g, old);
  };

  const double eta0 = tr.kl_penalty ? 0.0 : tr.eta_min;
  if (auto kl0 = kl_at(eta0); kl0 && *kl0 <= tr.epsilon) {
    return {*try_tilt(old, phi, eta0, tr.kl_penalty), {eta0, false, *kl0}, true};
  }
  auto feasible = [&](double eta) {
    auto kl = kl_at(eta);
    return kl && *kl <= tr.epsilon;
  };
  const auto eta = smallest_feasible(feasible, tr.eta_min, tr.eta_max, tr.tolerance);
  if (!eta) return {old, {tr.eta_max, true, 0.0}, false};
  Gaussian updated = *try_tilt(old, phi, *eta, tr.kl_penalty);
  const double kl = kl_gaussian(updated, old);
  return {std::move(updated), {*eta, true, kl}, true};
}

Vector categorical_tilt(const Categorical& old, const Vector& losses, double eta, bool kl_penalty) {
  const double div = divisor(eta, kl_penalty);
  Vector logits(old.size());
  for (int i = 0; i < old.size(); ++i) {
    logits[i] = old[i] > 0.0 ? std::log(old[i]) - losses[i] / div : -kInf;
  }
  const double lse = log_sum_exp(logits);
  return (logits.array() - lse).exp().matrix();
}

double categorical_dual(const Categorical& old, const Vector& losses, const TrustRegionConfig& tr, double eta) {
  const double div = divisor(eta, tr.kl_penalty);
  Vector logits(old.size());
  for (int i = 0; i < old.size(); ++i) {
    logits[i] = old[i] > 0.0 ? std::log(old[i]) - losses[i] / div : -kInf;
  }
  return eta * tr.epsilon + div * log_sum_exp(logits);
}

CategoricalUpdate categorical_more_update(const Categorical& old, const Vector& losses, const TrustRegionConfig& tr) {
  tr.validate();
  if (losses.size() != old.size()) throw InputError("categorical_more_update: loss/weight length mismatch");
  if ((old.probabilities().array() <= 0.0).any()) {
    throw DomainError("categorical_more_update: old distribution must be strictly positive");
  }
  if (!losses.allFinite()) throw NumericalError("categorical_more_update: non-finite losses");

  auto kl_at = [&](double eta) { return kl_categorical(categorical_tilt(old, losses, eta, tr.kl_penalty), old.probabilities()); };
  auto make = [&](double eta) {
    Vector p = categorical_tilt(old, losses, eta, tr.kl_penalty);
    p /= p.sum();
    return Categorical(p);
  };

  const double eta0 = tr.kl_penalty ? 0.0 : tr.eta_min;
  if (const double kl0 = kl_at(eta0); kl0 <= tr.epsilon) return {make(eta0), {eta0, false, kl0}};
  const auto eta = smallest_feasible([&](double e) { return kl_at(e) <= tr.epsilon; }, tr.eta_min, tr.eta_max,
                                     tr.tolerance);
  // KL -> 0 as eta grows, so eta_max is always feasible for sane bounds
  const double e = eta.value_or(tr.eta_max);
  Categorical updated = make(e);
  const double kl = kl_categorical(updated, old);
  return {std::move(updated), {e, true, kl}};
}

}  // namespace eim
