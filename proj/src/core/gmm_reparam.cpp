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

#include "core/gmm_reparam.hpp"

#include <cmath>

#include "core/errors.hpp"

namespace eim {

GmmReparam::GmmReparam(const Gmm& gmm)
    : dim_(gmm.dim()), k_(gmm.num_components()), block_(dim_ + dim_ * (dim_ + 1) / 2) {
  params_.resize(block_ * k_ + k_);
  for (int k = 0; k < k_; ++k) {
    const Gaussian& g = gmm.component(k);
    params_.segment(mean_offset(k), dim_) = g.mean();
    Eigen::Index o = chol_offset(k);
    for (int i = 0; i < dim_; ++i) {
      for (int j = 0; j <= i; ++j) params_[o++] = i == j ? std::log(g.cholesky()(i, i)) : g.cholesky()(i, j);
    }
    const double w = gmm.weights()[k];
    params_[logit_offset() + k] = std::log(std::max(w, 1e-300));
  }
}

Vector GmmReparam::mean(int k) const { return params_.segment(mean_offset(k), dim_); }

Matrix GmmReparam::cholesky(int k) const {
  Matrix l = Matrix::Zero(dim_, dim_);
  Eigen::Index o = chol_offset(k);
  for (int i = 0; i < dim_; ++i) {
    for (int j = 0; j <= i; ++j) l(i, j) = i == j ? std::exp(params_[o++]) : params_[o++];
  }
  return l;
}

Vector GmmReparam::weights() const {
  const Vector logits = params_.tail(k_);
  return (logits.array() - log_sum_exp(logits)).exp().matrix();
}

Gmm GmmReparam::to_gmm() const {
  std::vector<Gaussian> comps;
  comps.reserve(k_);
  for (int k = 0; k < k_; ++k) comps.push_back(Gaussian::from_cholesky(mean(k), cholesky(k)));
  Vector w = weights();
  w /= w.sum();
  return Gmm(std::move(comps), Categorical(w));
}

GmmReparam::Batch GmmReparam::sample(std::size_t n, Rng& rng) const {
  Batch b;
  b.labels = Categorical(weights() / weights().sum()).sample(n, rng);
  b.noise.resize(static_cast<Eigen::Index>(n), dim_);
  b.x.resize(static_cast<Eigen::Index>(n), dim_);
  std::vector<Matrix> chols;
  for (int k = 0; k < k_; ++k) chols.push_back(cholesky(k));
  for (Eigen::Index j = 0; j < b.x.rows(); ++j) {
    for (int i = 0; i < dim_; ++i) b.noise(j, i) = rng.normal();
    const int z = b.labels[j];
    b.x.row(j) = (mean(z) + chols[z] * b.noise.row(j).transpose()).transpose();
  }
  return b;
}

void GmmReparam::add_pathwise_gradient(const Batch& batch, const Matrix& grad_x, Vector& grad) const {
  if (grad_x.rows() != batch.x.rows() || grad_x.cols() != dim_) throw InputError("pathwise gradient shape mismatch");
  std::vector<Matrix> chols;
  for (int k = 0; k < k_; ++k) chols.push_back(cholesky(k));
  for (Eigen::Index j = 0; j < batch.x.rows(); ++j) {
    const int z = batch.labels[j];
    grad.segment(mean_offset(z), dim_) += grad_x.row(j).transpose();
    Eigen::Index o = chol_offset(z);
    for (int i = 0; i < dim_; ++i) {
      for (int c = 0; c <= i; ++c) {
        const double g = grad_x(j, i) * batch.noise(j, c);
        grad[o++] += i == c ? g * chols[z](i, i) : g;
      }
    }
  }
}

void GmmReparam::add_score_gradient(const Batch& batch, const Vector& coef, Vector& grad) const {
  const Vector pi = weights();
  for (Eigen::Index j = 0; j < batch.x.rows(); ++j) {
    grad.tail(k_) -= coef[j] * pi;
    grad[logit_offset() + batch.labels[j]] += coef[j];
  }
}

double GmmReparam::add_kl_penalty(const Gmm& old, Vector& grad) const {
  if (old.num_components() != k_ || old.dim() != dim_) throw InputError("add_kl_penalty: model shape mismatch");
  const Vector pi = weights();
  Vector c(k_);
  double value = 0.0;
  for (int k = 0; k < k_; ++k) {
    const Gaussian& o = old.component(k);
    const Matrix l = cholesky(k);
    const Vector mu = mean(k);
    const Gaussian cur = Gaussian::from_cholesky(mu, l);
    const double kl = kl_gaussian(cur, o);
    value += pi[k] * kl;
    grad.segment(mean_offset(k), dim_) += pi[k] * (o.precision() * (mu - o.mean()));
    const Matrix gl = o.precision() * l;
    Eigen::Index off = chol_offset(k);
    for (int i = 0; i < dim_; ++i) {
      for (int j = 0; j <= i; ++j) {
        const double g = i == j ? (gl(i, i) - 1.0 / l(i, i)) * l(i, i) : gl(i, j);
        grad[off++] += pi[k] * g;
      }
    }
    c[k] = kl + std::log(pi[k]) - std::log(old.weights()[k]);
  }
  value += kl_categorical(pi / pi.sum(), old.weights().probabilities());
  const double mean_c = pi.dot(c);
  grad.tail(k_) += (pi.array() * (c.array() - mean_c)).matrix();
  return value;
}

}  // namespace eim
