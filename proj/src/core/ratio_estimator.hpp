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
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "core/nn.hpp"

namespace eim {

/// Extra discriminative input g(x) (or g(x, context)) appended to the
/// classifier input. Must return a fixed-width vector.
struct FeatureMap {
  std::string name;
  int width = 0;
  std::function<Vector(const Vector& x, const Vector& context)> eval;
  /// width x dim(x). Optional; central differences are used when empty.
  std::function<Matrix(const Vector& x, const Vector& context)> jacobian;

  /// Row-wise application; `contexts` may have zero columns.
  Matrix apply(const Matrix& xs, const Matrix& contexts) const;
  Matrix jacobian_at(const Vector& x, const Vector& context) const;
};

struct TrainConfig {
  std::vector<int> hidden = {50, 50, 50};
  Activation activation = Activation::kRelu;
  AdamConfig adam{3e-4};
  int batch_size = 1000;
  int max_epochs = 200;
  double l2 = 0.0;
  double validation_fraction = 0.2;
  int patience = 10;
  /// Fresh fits train at least this many epochs before the best-validation
  /// snapshot is tracked; warm starts skip the burn-in.
  int min_epochs = 30;

  void validate() const;
};

/// Logistic-regression density-ratio estimator. The network logit is oriented
/// as log(q_old(x) / p(x)): q_old samples are the positive class.
///
/// Inputs are [x, context, g(x, context)] followed by a fixed affine
/// standardization that is set on the first fit and kept on warm starts.
class RatioEstimator {
 public:
  RatioEstimator(int x_width, int context_width, const TrainConfig& cfg, std::optional<FeatureMap> features,
                 Rng& rng);
  RatioEstimator(Mlp net, int x_width, int context_width, Vector shift, Vector scale,
                 std::optional<FeatureMap> features);

  int x_width() const { return x_width_; }
  int context_width() const { return context_width_; }
  int feature_width() const { return features_ ? features_->width : 0; }
  int input_width() const { return x_width_ + context_width_ + feature_width(); }

  const Mlp& net() const { return net_; }
  Mlp& net() { return net_; }
  const std::optional<FeatureMap>& features() const { return features_; }
  const Vector& input_shift() const { return shift_; }
  const Vector& input_scale() const { return scale_; }
  void set_normalization(Vector shift, Vector scale);

  /// Standardized network inputs, input_width x n.
  Matrix assemble(const Matrix& xs, const Matrix& contexts = Matrix()) const;

  /// Raw logits phi for n x d samples.
  Vector forward_logit(const Matrix& xs, const Matrix& contexts = Matrix()) const;
  /// log(q_old / p); positive where q_old exceeds p.
  Vector log_ratios(const Matrix& xs, const Matrix& contexts = Matrix()) const { return forward_logit(xs, contexts); }
  double log_ratio(const Vector& x, const Vector& context = Vector()) const;

  /// d log_ratio / dx for each sample (n x x_width), including the chain
  /// through the feature map.
  Matrix input_gradient(const Matrix& xs, const Matrix& contexts = Matrix()) const;

 private:
  void check_widths(const Matrix& xs, const Matrix& contexts) const;

  Mlp net_;
  int x_width_;
  int context_width_;
  Vector shift_, scale_;
  std::optional<FeatureMap> features_;
};

struct EpochStats {
  int epoch;
  double train_bce;
  double validation_bce;
};

struct TrainReport {
  std::vector<EpochStats> epochs;
  int best_epoch = 0;
  double best_validation_bce = 0.0;
  double final_validation_bce = 0.0;
};

void write_training_report_csv(const TrainReport& report, std::ostream& os);

struct RatioTrainResult {
  RatioEstimator estimator;
  TrainReport report;
};

/// Balanced binary cross-entropy training with mini-batch Adam, L2 on the
/// weights and early stopping on a held-out split; returns the snapshot with
/// the best validation loss. Contexts may be empty (zero columns).
RatioTrainResult train_ratio(const Matrix& p_samples, const Matrix& q_samples, const TrainConfig& cfg,
                             const std::optional<FeatureMap>& features, std::uint64_t seed,
                             const RatioEstimator* warm_start = nullptr, const Matrix& p_contexts = Matrix(),
                             const Matrix& q_contexts = Matrix());

/// Numerically stable log(1 + exp(v)).
double softplus(double v);

}  // namespace eim
