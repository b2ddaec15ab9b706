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

#include <string>
#include <vector>

#include "core/distributions.hpp"

namespace eim {

enum class Activation { kRelu, kTanh };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

/// Fully connected network with a linear output layer. All parameters live in
/// one contiguous vector (per layer: weights column-major out x in, then
/// biases), which keeps Adam, L2 and finite-difference checks trivial.
///
/// Batched calls take inputs as width x n (one sample per column).
class Mlp {
 public:
  Mlp() = default;
  Mlp(std::vector<int> layer_sizes, Activation activation);

  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and biases.
  void init(Rng& rng);

  int input_width() const { return sizes_.front(); }
  int output_width() const { return sizes_.back(); }
  int num_layers() const { return static_cast<int>(sizes_.size()) - 1; }
  const std::vector<int>& layer_sizes() const { return sizes_; }
  Activation activation() const { return activation_; }

  Vector& params() { return params_; }
  const Vector& params() const { return params_; }

  Eigen::Map<Matrix> weight(int layer);
  Eigen::Map<const Matrix> weight(int layer) const;
  Eigen::Map<Vector> bias(int layer);
  Eigen::Map<const Vector> bias(int layer) const;

  struct Tape {
    std::vector<Matrix> activations;  // [0] = input, [l] = output of layer l
  };

  Matrix forward(const Matrix& inputs, Tape* tape = nullptr) const;

  /// Reverse pass for d(loss)/d(output) = `grad_output` (out x n). Adds the
  /// parameter gradient into `grad_params` when non-null and returns
  /// d(loss)/d(input) (in x n).
  Matrix backward(const Tape& tape, const Matrix& grad_output, Vector* grad_params) const;

  /// Sum of squared weights (biases excluded).
  double weight_sq_norm() const;
  /// grad += 2 * coef * w for weight entries.
  void add_l2_gradient(double coef, Vector& grad) const;

 private:
  void layout();

  std::vector<int> sizes_;
  Activation activation_ = Activation::kRelu;
  Vector params_;
  std::vector<Eigen::Index> w_offset_, b_offset_;
};

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class Adam {
 public:
  Adam() = default;
  Adam(Eigen::Index n, AdamConfig cfg) : cfg_(cfg), m_(Vector::Zero(n)), v_(Vector::Zero(n)) {}

  /// In-place descent step on `params` for gradient `grad`.
  void step(Vector& params, const Vector& grad);
  const AdamConfig& config() const { return cfg_; }
  long steps() const { return t_; }

 private:
  AdamConfig cfg_;
  Vector m_, v_;
  long t_ = 0;
};

}  // namespace eim
