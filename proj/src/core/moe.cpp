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

#include "core/moe.hpp"

#include <cmath>

#include "core/errors.hpp"

namespace eim {

Matrix cholesky_from_raw(const Eigen::Ref<const Vector>& raw, int d) {
  Matrix l = Matrix::Zero(d, d);
  Eigen::Index o = 0;
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j <= i; ++j, ++o) l(i, j) = i == j ? std::exp(raw[o]) : raw[o];
  }
  return l;
}

MixtureOfExperts::MixtureOfExperts(int context_dim, int dim, int components, const std::vector<int>& hidden,
                                   Activation act)
    : context_dim_(context_dim), dim_(dim) {
  if (context_dim < 1 || dim < 1 || components < 1) throw InputError("MixtureOfExperts: sizes must be positive");
  std::vector<int> g = {context_dim};
  g.insert(g.end(), hidden.begin(), hidden.end());
  std::vector<int> e = g;
  g.push_back(components);
  e.push_back(dim + cholesky_raw_width(dim));
  gating_ = Mlp(g, act);
  for (int k = 0; k < components; ++k) experts_.emplace_back(e, act);
}

MixtureOfExperts::MixtureOfExperts(Mlp gating, std::vector<Mlp> experts, int context_dim, int dim)
    : context_dim_(context_dim), dim_(dim), gating_(std::move(gating)), experts_(std::move(experts)) {
  if (experts_.empty()) throw InputError("MixtureOfExperts: no experts");
  if (gating_.input_width() != context_dim || gating_.output_width() != num_components()) {
    throw InputError("MixtureOfExperts: gating network shape mismatch");
  }
  for (const Mlp& e : experts_) {
    if (e.input_width() != context_dim || e.output_width() != expert_output_width()) {
      throw InputError("MixtureOfExperts: expert network shape mismatch");
    }
  }
}

void MixtureOfExperts::check_contexts(const Matrix& contexts) const {
  if (contexts.cols() != context_dim_) throw InputError("MixtureOfExperts: context width mismatch");
}

Matrix MixtureOfExperts::gating_probs(const Matrix& contexts) const {
  check_contexts(contexts);
  Matrix logits = gating_.forward(contexts.transpose()).transpose();
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    logits.row(i) = (logits.row(i).array() - m).exp();
    logits.row(i) /= logits.row(i).sum();
  }
  return logits;
}

std::vector<Gaussian> MixtureOfExperts::expert_gaussians(int k, const Matrix& contexts) const {
  check_contexts(contexts);
  const Matrix out = experts_[k].forward(contexts.transpose());
  std::vector<Gaussian> gs;
  gs.reserve(static_cast<std::size_t>(out.cols()));
  for (Eigen::Index j = 0; j < out.cols(); ++j) {
    if (!out.col(j).allFinite()) throw NumericalError("MixtureOfExperts: non-finite expert output at context " + std::to_string(j));
    Matrix l = cholesky_from_raw(out.col(j).tail(cholesky_raw_width(dim_)), dim_);
    if (!l.allFinite() || l.diagonal().minCoeff() <= 0.0) {
      throw NumericalError("MixtureOfExperts: degenerate Cholesky factor at context " + std::to_string(j));
    }
    gs.push_back(Gaussian::from_cholesky(out.col(j).head(dim_), std::move(l)));
  }
  return gs;
}

Matrix MixtureOfExperts::joint_log_densities(const Matrix& contexts, const Matrix& xs) const {
  check_contexts(contexts);
  if (xs.cols() != dim_ || xs.rows() != contexts.rows()) throw InputError("MixtureOfExperts: sample shape mismatch");
  Matrix out = gating_probs(contexts).array().log().matrix();
  for (int k = 0; k < num_components(); ++k) {
    const std::vector<Gaussian> gs = expert_gaussians(k, contexts);
    for (Eigen::Index j = 0; j < xs.rows(); ++j) out(j, k) += gs[j].log_density(Vector(xs.row(j).transpose()));
  }
  return out;
}

Vector MixtureOfExperts::log_density(const Matrix& contexts, const Matrix& xs) const {
  const Matrix joint = joint_log_densities(contexts, xs);
  Vector out(joint.rows());
  for (Eigen::Index j = 0; j < joint.rows(); ++j) {
    out[j] = std::max(log_sum_exp(joint.row(j).transpose()), kLogDensityFloor);
  }
  return out;
}

MixtureOfExperts::Samples MixtureOfExperts::sample(const Matrix& contexts, Rng& rng) const {
  const Matrix probs = gating_probs(contexts);
  std::vector<std::vector<Gaussian>> experts;
  for (int k = 0; k < num_components(); ++k) experts.push_back(expert_gaussians(k, contexts));
  Samples s;
  s.x.resize(contexts.rows(), dim_);
  s.labels.resize(static_cast<std::size_t>(contexts.rows()));
  for (Eigen::Index j = 0; j < contexts.rows(); ++j) {
    Vector p = probs.row(j).transpose();
    p /= p.sum();
    double u = rng.uniform();
    int z = num_components() - 1;
    for (int k = 0; k < num_components(); ++k) {
      u -= p[k];
      if (u < 0.0 && p[k] > 0.0) {
        z = k;
        break;
      }
    }
    s.labels[static_cast<std::size_t>(j)] = z;
    s.x.row(j) = experts[z][j].sample(1, rng);
  }
  return s;
}

MixtureOfExperts init_moe_from_data(const Matrix& contexts, const Matrix& xs, int components,
                                    const std::vector<int>& hidden, Activation act, std::uint64_t seed) {
  if (contexts.rows() != xs.rows() || xs.rows() == 0) throw InputError("init_moe_from_data: data shape mismatch");
  MixtureOfExperts moe(static_cast<int>(contexts.cols()), static_cast<int>(xs.cols()), components, hidden, act);
  Rng rng(seed, stream::kInitialization);
  const int last = moe.gating().num_layers() - 1;
  moe.gating().init(rng);
  moe.gating().weight(last) *= 0.1;
  moe.gating().bias(last).setZero();

  const Eigen::Index n = xs.rows();
  const int d = moe.dim();
  const Vector mean = xs.colwise().mean().transpose();
  const Vector stddev = ((xs.rowwise() - mean.transpose()).array().square().colwise().sum() / static_cast<double>(n))
                            .sqrt()
                            .max(1e-3)
                            .transpose();
  // k-means++ picks for the expert mean biases.
  std::vector<Eigen::Index> picks = {static_cast<Eigen::Index>(rng.uniform() * static_cast<double>(n)) % n};
  Vector d2 = (xs.rowwise() - xs.row(picks[0])).rowwise().squaredNorm();
  while (static_cast<int>(picks.size()) < components) {
    double u = rng.uniform() * d2.sum();
    Eigen::Index pick = n - 1;
    for (Eigen::Index i = 0; i < n && d2.sum() > 0.0; ++i) {
      u -= d2[i];
      if (u < 0.0) {
        pick = i;
        break;
      }
    }
    picks.push_back(pick);
    d2 = d2.cwiseMin((xs.rowwise() - xs.row(pick)).rowwise().squaredNorm());
  }
  for (int k = 0; k < components; ++k) {
    Mlp& e = moe.expert(k);
    e.init(rng);
    e.weight(last) *= 0.1;
    Eigen::Map<Vector> b = e.bias(last);
    b.setZero();
    b.head(d) = xs.row(picks[k]).transpose();
    Eigen::Index o = d;
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j <= i; ++j, ++o) b[o] = i == j ? std::log(stddev[i]) : 0.0;
    }
  }
  return moe;
}

}  // namespace eim
