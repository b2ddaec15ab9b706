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

#include "core/nn.hpp"

#include <cmath>

#include "core/errors.hpp"

namespace eim {

std::string to_string(Activation a) { return a == Activation::kRelu ? "relu" : "tanh"; }

Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::kRelu;
  if (s == "tanh") return Activation::kTanh;
  throw ConfigError("unknown activation '" + s + "' (valid: relu, tanh)");
}

Mlp::Mlp(std::vector<int> layer_sizes, Activation activation)
    : sizes_(std::move(layer_sizes)), activation_(activation) {
  if (sizes_.size() < 2) throw InputError("Mlp: need at least input and output widths");
  for (int s : sizes_) {
    if (s <= 0) throw InputError("Mlp: layer widths must be positive");
  }
  layout();
  params_ = Vector::Zero(b_offset_.back() + sizes_.back());
}

void Mlp::layout() {
  w_offset_.clear();
  b_offset_.clear();
  Eigen::Index off = 0;
  for (int l = 0; l < num_layers(); ++l) {
    w_offset_.push_back(off);
    off += static_cast<Eigen::Index>(sizes_[l + 1]) * sizes_[l];
    b_offset_.push_back(off);
    off += sizes_[l + 1];
  }
}

void Mlp::init(Rng& rng) {
  for (int l = 0; l < num_layers(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(sizes_[l]));
    auto w = weight(l);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = bound * (2.0 * rng.uniform() - 1.0);
    auto b = bias(l);
    for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = bound * (2.0 * rng.uniform() - 1.0);
  }
}

Eigen::Map<Matrix> Mlp::weight(int l) {
  return Eigen::Map<Matrix>(params_.data() + w_offset_[l], sizes_[l + 1], sizes_[l]);
}
Eigen::Map<const Matrix> Mlp::weight(int l) const {
  return Eigen::Map<const Matrix>(params_.data() + w_offset_[l], sizes_[l + 1], sizes_[l]);
}
Eigen::Map<Vector> Mlp::bias(int l) { return Eigen::Map<Vector>(params_.data() + b_offset_[l], sizes_[l + 1]); }
Eigen::Map<const Vector> Mlp::bias(int l) const {
  return Eigen::Map<const Vector>(params_.data() + b_offset_[l], sizes_[l + 1]);
}

Matrix Mlp::forward(const Matrix& inputs, Tape* tape) const {
  if (inputs.rows() != input_width()) {
    throw InputError("Mlp: input width " + std::to_string(inputs.rows()) + " != " + std::to_string(input_width()));
  }
  if (tape) {
    tape->activations.resize(num_layers() + 1);
    tape->activations[0] = inputs;
  }
  Matrix h = inputs;
  for (int l = 0; l < num_layers(); ++l) {
    Matrix a = weight(l) * h;
    a.colwise() += bias(l);
    if (l + 1 < num_layers()) {
      if (activation_ == Activation::kRelu) {
        a = a.cwiseMax(0.0);
      } else {
        a = a.array().tanh().matrix();
      }
    }
    if (tape) tape->activations[l + 1] = a;
    h = std::move(a);
  }
  return h;
}

Matrix Mlp::backward(const Tape& tape, const Matrix& grad_output, Vector* grad_params) const {
  if (grad_output.rows() != output_width()) throw InputError("Mlp::backward: gradient width mismatch");
  Matrix delta = grad_output;
  for (int l = num_layers() - 1; l >= 0; --l) {
    const Matrix& in = tape.activations[l];
    if (grad_params) {
      Eigen::Map<Matrix>(grad_params->data() + w_offset_[l], sizes_[l + 1], sizes_[l]).noalias() +=
          delta * in.transpose();
      Eigen::Map<Vector>(grad_params->data() + b_offset_[l], sizes_[l + 1]) += delta.rowwise().sum();
    }
    Matrix prev = weight(l).transpose() * delta;
    if (l > 0) {
      if (activation_ == Activation::kRelu) {
        prev = (in.array() > 0.0).select(prev, 0.0);
      } else {
        prev.array() *= 1.0 - in.array().square();
      }
    }
    delta = std::move(prev);
  }
  return delta;
}

double Mlp::weight_sq_norm() const {
  double s = 0.0;
  for (int l = 0; l < num_layers(); ++l) s += weight(l).squaredNorm();
  return s;
}

void Mlp::add_l2_gradient(double coef, Vector& grad) const {
  for (int l = 0; l < num_layers(); ++l) {
    Eigen::Map<Matrix>(grad.data() + w_offset_[l], sizes_[l + 1], sizes_[l]) += 2.0 * coef * weight(l);
  }
}

void Adam::step(Vector& params, const Vector& grad) {
  ++t_;
  m_ = cfg_.beta1 * m_ + (1.0 - cfg_.beta1) * grad;
  v_ = cfg_.beta2 * v_ + (1.0 - cfg_.beta2) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  params.array() -= cfg_.learning_rate * (m_.array() / c1) / ((v_.array() / c2).sqrt() + cfg_.epsilon);
}

}  // namespace eim
