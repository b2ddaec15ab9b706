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

#include "core/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "core/errors.hpp"

namespace eim {
namespace {

constexpr double kMinPivot = 1e-12;
constexpr double kSymmetryTol = 1e-10;
constexpr double kLog2Pi = 1.8378770664093454835606594728112;

void check_square(const Matrix& m, Eigen::Index d, const char* what) {
  if (m.rows() != d || m.cols() != d) {
    throw InputError(std::string(what) + ": expected " + std::to_string(d) + "x" + std::to_string(d) +
                     " matrix, got " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  }
}

// Pivot floor with a little slack so that sigma^2 = 1e-12 itself is admitted.
bool pivot_ok(double l_jj) { return l_jj > 0.0 && l_jj * l_jj >= kMinPivot * (1.0 - 1e-9); }

}  // namespace

Gaussian::Gaussian(Vector mean, const Matrix& covariance) : mean_(std::move(mean)) {
  const Eigen::Index d = mean_.size();
  if (d == 0) throw InputError("Gaussian: empty mean");
  check_square(covariance, d, "Gaussian covariance");
  if (!covariance.allFinite() || !mean_.allFinite()) throw DomainError("Gaussian: non-finite parameters");
  const double scale = std::max(1.0, covariance.cwiseAbs().maxCoeff());
  if ((covariance - covariance.transpose()).cwiseAbs().maxCoeff() > kSymmetryTol * scale) {
    throw DomainError("Gaussian: covariance is not symmetric");
  }
  cov_ = 0.5 * (covariance + covariance.transpose());
  Eigen::LLT<Matrix> llt(cov_);
  if (llt.info() != Eigen::Success) throw DomainError("Gaussian: covariance is not positive definite");
  chol_ = llt.matrixL();
  finish_from_cholesky();
}

Gaussian Gaussian::from_cholesky(Vector mean, Matrix chol) {
  const Eigen::Index d = mean.size();
  if (d == 0) throw InputError("Gaussian: empty mean");
  check_square(chol, d, "Gaussian cholesky factor");
  Gaussian g;
  g.mean_ = std::move(mean);
  g.chol_ = chol.triangularView<Eigen::Lower>();
  g.cov_ = g.chol_ * g.chol_.transpose();
  g.finish_from_cholesky();
  return g;
}

Gaussian Gaussian::from_natural(const Matrix& precision, const Vector& precision_mean) {
  const Eigen::Index d = precision_mean.size();
  check_square(precision, d, "Gaussian precision");
  const Matrix q = 0.5 * (precision + precision.transpose());
  Eigen::LLT<Matrix> llt(q);
  if (llt.info() != Eigen::Success) throw DomainError("Gaussian: precision is not positive definite");
  Matrix cov = llt.solve(Matrix::Identity(d, d));
  cov = 0.5 * (cov + cov.transpose());
  return Gaussian(llt.solve(precision_mean), cov);
}

void Gaussian::finish_from_cholesky() {
  const Eigen::Index d = mean_.size();
  for (Eigen::Index j = 0; j < d; ++j) {
    if (!pivot_ok(chol_(j, j))) {
      throw DomainError("Gaussian: degenerate covariance (Cholesky pivot below 1e-12)");
    }
  }
  log_det_ = 2.0 * chol_.diagonal().array().log().sum();
  const auto lower = chol_.triangularView<Eigen::Lower>();
  Matrix linv = lower.solve(Matrix::Identity(d, d));
  precision_ = linv.transpose() * linv;
  precision_ = 0.5 * (precision_ + precision_.transpose());
  precision_mean_ = precision_ * mean_;
}

double Gaussian::entropy() const { return 0.5 * (dim() * (1.0 + kLog2Pi) + log_det_); }

double Gaussian::log_density(const Vector& x) const {
  if (x.size() != mean_.size()) {
    throw InputError("Gaussian::log_density: dimension " + std::to_string(x.size()) + " != " +
                     std::to_string(mean_.size()));
  }
  const Vector z = chol_.triangularView<Eigen::Lower>().solve(x - mean_);
  return -0.5 * (dim() * kLog2Pi + log_det_ + z.squaredNorm());
}

Vector Gaussian::log_density(const Matrix& xs) const {
  if (xs.cols() != mean_.size()) {
    throw InputError("Gaussian::log_density: sample width " + std::to_string(xs.cols()) + " != " +
                     std::to_string(mean_.size()));
  }
  Matrix centered = (xs.rowwise() - mean_.transpose()).transpose();
  chol_.triangularView<Eigen::Lower>().solveInPlace(centered);
  const double c = -0.5 * (dim() * kLog2Pi + log_det_);
  return (c - 0.5 * centered.colwise().squaredNorm().array()).matrix().transpose();
}

Matrix Gaussian::sample(std::size_t n, Rng& rng) const {
  if (n == 0) throw InputError("Gaussian::sample: n must be >= 1");
  Matrix eps(dim(), static_cast<Eigen::Index>(n));
  for (Eigen::Index j = 0; j < eps.cols(); ++j) {
    for (Eigen::Index i = 0; i < eps.rows(); ++i) eps(i, j) = rng.normal();
  }
  Matrix xs = chol_.triangularView<Eigen::Lower>() * eps;
  xs.colwise() += mean_;
  return xs.transpose();
}

Categorical::Categorical(Vector probabilities) : probs_(std::move(probabilities)) {
  if (probs_.size() == 0) throw InputError("Categorical: empty probability vector");
  if (!probs_.allFinite() || (probs_.array() < 0.0).any()) {
    throw DomainError("Categorical: probabilities must be finite and non-negative");
  }
  const double s = probs_.sum();
  if (std::abs(s - 1.0) > 1e-10) {
    throw DomainError("Categorical: probabilities sum to " + std::to_string(s) + ", expected 1");
  }
}

Categorical Categorical::uniform(int k) { return Categorical(Vector::Constant(k, 1.0 / k)); }

std::vector<int> Categorical::sample(std::size_t n, Rng& rng) const {
  if (n == 0) throw InputError("Categorical::sample: n must be >= 1");
  std::vector<double> cdf(probs_.size());
  double acc = 0.0;
  for (Eigen::Index i = 0; i < probs_.size(); ++i) {
    acc += probs_[i];
    cdf[i] = acc;
  }
  std::vector<int> out(n);
  for (auto& label : out) {
    const double u = rng.uniform() * acc;
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    int idx = static_cast<int>(std::min<std::ptrdiff_t>(it - cdf.begin(), probs_.size() - 1));
    // never land on a zero-probability entry through rounding
    while (probs_[idx] == 0.0 && idx > 0) --idx;
    while (probs_[idx] == 0.0 && idx + 1 < probs_.size()) ++idx;
    label = idx;
  }
  return out;
}

Gmm::Gmm(std::vector<Gaussian> components, Categorical weights)
    : components_(std::move(components)), weights_(std::move(weights)) {
  if (components_.empty()) throw InputError("Gmm: needs at least one component");
  if (weights_.size() != static_cast<int>(components_.size())) {
    throw InputError("Gmm: " + std::to_string(weights_.size()) + " weights for " +
                     std::to_string(components_.size()) + " components");
  }
  for (const auto& c : components_) {
    if (c.dim() != components_.front().dim()) throw InputError("Gmm: components differ in dimension");
  }
}

Matrix Gmm::joint_log_densities(const Matrix& xs) const {
  if (xs.cols() != dim()) {
    throw InputError("Gmm: sample width " + std::to_string(xs.cols()) + " != " + std::to_string(dim()));
  }
  Matrix out(xs.rows(), num_components());
  for (int i = 0; i < num_components(); ++i) {
    const double lw = weights_[i] > 0.0 ? std::log(weights_[i]) : -std::numeric_limits<double>::infinity();
    out.col(i) = components_[i].log_density(xs).array() + lw;
  }
  return out;
}

Vector Gmm::log_density(const Matrix& xs) const {
  const Matrix joint = joint_log_densities(xs);
  Vector out(xs.rows());
  for (Eigen::Index r = 0; r < joint.rows(); ++r) {
    const double v = log_sum_exp(joint.row(r).transpose());
    out[r] = std::isfinite(v) ? v : kLogDensityFloor;
  }
  return out;
}

double Gmm::log_density(const Vector& x) const {
  if (x.size() != dim()) {
    throw InputError("Gmm: dimension " + std::to_string(x.size()) + " != " + std::to_string(dim()));
  }
  return log_density(Matrix(x.transpose()))[0];
}

Gmm::Samples Gmm::sample(std::size_t n, Rng& rng) const {
  Samples s;
  s.labels = weights_.sample(n, rng);
  s.x.resize(static_cast<Eigen::Index>(n), dim());
  Vector eps(dim());
  for (std::size_t j = 0; j < n; ++j) {
    const Gaussian& g = components_[s.labels[j]];
    for (int i = 0; i < dim(); ++i) eps[i] = rng.normal();
    s.x.row(static_cast<Eigen::Index>(j)) = (g.mean() + g.cholesky().triangularView<Eigen::Lower>() * eps).transpose();
  }
  return s;
}

double kl_gaussian(const Gaussian& a, const Gaussian& b) {
  if (a.dim() != b.dim()) throw InputError("kl_gaussian: dimension mismatch");
  const auto lb = b.cholesky().triangularView<Eigen::Lower>();
  const Matrix m = lb.solve(a.cholesky());
  const Vector dm = lb.solve(b.mean() - a.mean());
  const double kl =
      0.5 * (m.squaredNorm() + dm.squaredNorm() - a.dim() + b.log_det_covariance() - a.log_det_covariance());
  return std::max(0.0, kl);
}

double kl_categorical(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw InputError("kl_categorical: length mismatch");
  double kl = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (a[i] <= 0.0) continue;
    if (b[i] <= 0.0) throw DomainError("kl_categorical: b has zero mass where a is positive");
    kl += a[i] * (std::log(a[i]) - std::log(b[i]));
  }
  return std::max(0.0, kl);
}

double kl_categorical(const Categorical& a, const Categorical& b) {
  return kl_categorical(a.probabilities(), b.probabilities());
}

double log_sum_exp(const Eigen::Ref<const Vector>& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().sum());
}

}  // namespace eim
