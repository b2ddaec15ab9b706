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

#include "core/ratio_estimator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "core/errors.hpp"

namespace eim {
namespace {

Matrix raw_inputs(const Matrix& xs, const Matrix& contexts, const std::optional<FeatureMap>& features) {
  const int fw = features ? features->width : 0;
  Matrix out(xs.cols() + contexts.cols() + fw, xs.rows());
  out.topRows(xs.cols()) = xs.transpose();
  if (contexts.cols() > 0) out.middleRows(xs.cols(), contexts.cols()) = contexts.transpose();
  if (features) out.bottomRows(fw) = features->apply(xs, contexts).transpose();
  return out;
}

// Balanced BCE over a set of logits with labels; returns 0.5 * (mean_pos + mean_neg).
double balanced_bce(const Vector& logits, const std::vector<int>& labels) {
  double pos = 0.0, neg = 0.0;
  int npos = 0, nneg = 0;
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    if (labels[i] == 1) {
      pos += softplus(-logits[i]);
      ++npos;
    } else {
      neg += softplus(logits[i]);
      ++nneg;
    }
  }
  return 0.5 * (npos ? pos / npos : 0.0) + 0.5 * (nneg ? neg / nneg : 0.0);
}

}  // namespace

double softplus(double v) { return std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v))); }

Matrix FeatureMap::apply(const Matrix& xs, const Matrix& contexts) const {
  Matrix out(xs.rows(), width);
  const Vector empty;
  for (Eigen::Index r = 0; r < xs.rows(); ++r) {
    const Vector x = xs.row(r).transpose();
    const Vector g = contexts.cols() > 0 ? eval(x, contexts.row(r).transpose()) : eval(x, empty);
    if (g.size() != width) {
      throw InputError("FeatureMap '" + name + "': produced width " + std::to_string(g.size()) + ", declared " +
                       std::to_string(width));
    }
    out.row(r) = g.transpose();
  }
  return out;
}

Matrix FeatureMap::jacobian_at(const Vector& x, const Vector& context) const {
  if (jacobian) return jacobian(x, context);
  Matrix jac(width, x.size());
  Vector xp = x, xm = x;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double h = 1e-6 * std::max(1.0, std::abs(x[j]));
    xp[j] = x[j] + h;
    xm[j] = x[j] - h;
    jac.col(j) = (eval(xp, context) - eval(xm, context)) / (2.0 * h);
    xp[j] = xm[j] = x[j];
  }
  return jac;
}

void TrainConfig::validate() const {
  if (batch_size <= 0 || max_epochs < 0 || min_epochs < 0 || patience <= 0)
    throw ConfigError("ratio: counts must be positive");
  if (!(adam.learning_rate > 0.0) || !(adam.beta1 >= 0.0 && adam.beta1 < 1.0) ||
      !(adam.beta2 >= 0.0 && adam.beta2 < 1.0) || !(adam.epsilon > 0.0)) {
    throw ConfigError("ratio: invalid Adam settings");
  }
  if (l2 < 0.0) throw ConfigError("ratio: l2 must be non-negative");
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
    throw ConfigError("ratio: validation fraction must lie in (0, 1)");
  }
  for (int h : hidden) {
    if (h <= 0) throw ConfigError("ratio: hidden widths must be positive");
  }
}

RatioEstimator::RatioEstimator(int x_width, int context_width, const TrainConfig& cfg,
                               std::optional<FeatureMap> features, Rng& rng)
    : x_width_(x_width), context_width_(context_width), features_(std::move(features)) {
  std::vector<int> sizes;
  sizes.push_back(input_width());
  sizes.insert(sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
  sizes.push_back(1);
  net_ = Mlp(sizes, cfg.activation);
  net_.init(rng);
  shift_ = Vector::Zero(input_width());
  scale_ = Vector::Ones(input_width());
}

RatioEstimator::RatioEstimator(Mlp net, int x_width, int context_width, Vector shift, Vector scale,
                               std::optional<FeatureMap> features)
    : net_(std::move(net)), x_width_(x_width), context_width_(context_width), features_(std::move(features)) {
  if (net_.input_width() != input_width() || net_.output_width() != 1) {
    throw InputError("RatioEstimator: network shape does not match input/feature widths");
  }
  set_normalization(std::move(shift), std::move(scale));
}

void RatioEstimator::set_normalization(Vector shift, Vector scale) {
  if (shift.size() != input_width() || scale.size() != input_width() || (scale.array() <= 0.0).any()) {
    throw InputError("RatioEstimator: invalid input normalization");
  }
  shift_ = std::move(shift);
  scale_ = std::move(scale);
}

void RatioEstimator::check_widths(const Matrix& xs, const Matrix& contexts) const {
  if (xs.cols() != x_width_) {
    throw InputError("RatioEstimator: sample width " + std::to_string(xs.cols()) + " != " + std::to_string(x_width_));
  }
  if (contexts.cols() != context_width_ || (context_width_ > 0 && contexts.rows() != xs.rows())) {
    throw InputError("RatioEstimator: context shape mismatch");
  }
}

Matrix RatioEstimator::assemble(const Matrix& xs, const Matrix& contexts) const {
  check_widths(xs, contexts);
  Matrix in = raw_inputs(xs, contexts, features_);
  in.colwise() -= shift_;
  in.array().colwise() /= scale_.array();
  return in;
}

Vector RatioEstimator::forward_logit(const Matrix& xs, const Matrix& contexts) const {
  return net_.forward(assemble(xs, contexts)).row(0).transpose();
}

double RatioEstimator::log_ratio(const Vector& x, const Vector& context) const {
  const Matrix ctx = context.size() ? Matrix(context.transpose()) : Matrix();
  return forward_logit(Matrix(x.transpose()), ctx)[0];
}

Matrix RatioEstimator::input_gradient(const Matrix& xs, const Matrix& contexts) const {
  Mlp::Tape tape;
  net_.forward(assemble(xs, contexts), &tape);
  Matrix g_in = net_.backward(tape, Matrix::Ones(1, xs.rows()), nullptr);
  g_in.array().colwise() /= scale_.array();
  Matrix out = g_in.topRows(x_width_).transpose();
  if (features_) {
    const Vector empty;
    for (Eigen::Index r = 0; r < xs.rows(); ++r) {
      const Vector x = xs.row(r).transpose();
      const Matrix jac = context_width_ > 0 ? features_->jacobian_at(x, contexts.row(r).transpose())
                                            : features_->jacobian_at(x, empty);
      out.row(r) += (jac.transpose() * g_in.col(r).tail(features_->width)).transpose();
    }
  }
  return out;
}

void write_training_report_csv(const TrainReport& report, std::ostream& os) {
  os << "epoch,train_bce,validation_bce\n";
  os.precision(17);
  for (const auto& e : report.epochs) os << e.epoch << ',' << e.train_bce << ',' << e.validation_bce << '\n';
}

RatioTrainResult train_ratio(const Matrix& p_samples, const Matrix& q_samples, const TrainConfig& cfg,
                             const std::optional<FeatureMap>& features, std::uint64_t seed,
                             const RatioEstimator* warm_start, const Matrix& p_contexts, const Matrix& q_contexts) {
  cfg.validate();
  if (p_samples.rows() == 0 || q_samples.rows() == 0) throw InputError("train_ratio: empty sample set");
  if (p_samples.cols() != q_samples.cols()) throw InputError("train_ratio: p and q sample widths differ");
  if (p_contexts.cols() != q_contexts.cols() ||
      (p_contexts.cols() > 0 && (p_contexts.rows() != p_samples.rows() || q_contexts.rows() != q_samples.rows()))) {
    throw InputError("train_ratio: context shape mismatch");
  }

  Rng rng(seed, stream::kRatioTraining);
  Rng init_rng = rng.derive(1);
  RatioEstimator est = warm_start ? *warm_start
                                  : RatioEstimator(static_cast<int>(p_samples.cols()),
                                                   static_cast<int>(p_contexts.cols()), cfg, features, init_rng);
  if (warm_start && (est.x_width() != p_samples.cols() || est.context_width() != p_contexts.cols())) {
    throw InputError("train_ratio: warm start estimator has different input widths");
  }

  // Positive class: q_old samples, so the logit estimates log(q_old / p).
  const Eigen::Index np = p_samples.rows(), nq = q_samples.rows();
  Matrix raw(est.input_width(), np + nq);
  raw.leftCols(np) = raw_inputs(p_samples, p_contexts, est.features());
  raw.rightCols(nq) = raw_inputs(q_samples, q_contexts, est.features());
  if (!warm_start) {
    const Vector mean = raw.rowwise().mean();
    const Vector sd = ((raw.colwise() - mean).array().square().rowwise().mean()).sqrt().matrix();
    est.set_normalization(mean, sd.cwiseMax(1e-8));
  }
  Matrix inputs = raw;
  inputs.colwise() -= est.input_shift();
  inputs.array().colwise() /= est.input_scale().array();

  auto split = [&](Eigen::Index offset, Eigen::Index n, std::vector<Eigen::Index>& train,
                   std::vector<Eigen::Index>& val) {
    std::vector<Eigen::Index> idx(n);
    std::iota(idx.begin(), idx.end(), offset);
    std::shuffle(idx.begin(), idx.end(), rng);
    Eigen::Index nval = static_cast<Eigen::Index>(std::floor(cfg.validation_fraction * static_cast<double>(n)));
    if (n >= 2) nval = std::clamp<Eigen::Index>(nval, 1, n - 1);
    else nval = 0;
    val.insert(val.end(), idx.begin(), idx.begin() + nval);
    train.insert(train.end(), idx.begin() + nval, idx.end());
  };
  std::vector<Eigen::Index> train_idx, val_idx;
  split(0, np, train_idx, val_idx);
  const auto ntrain_p = static_cast<double>(train_idx.size());
  split(np, nq, train_idx, val_idx);
  const auto ntrain_q = static_cast<double>(train_idx.size()) - ntrain_p;
  if (val_idx.empty()) val_idx = train_idx;

  auto label_of = [np](Eigen::Index col) { return col >= np ? 1 : 0; };
  Matrix val_in(inputs.rows(), static_cast<Eigen::Index>(val_idx.size()));
  std::vector<int> val_labels(val_idx.size());
  for (std::size_t i = 0; i < val_idx.size(); ++i) {
    val_in.col(static_cast<Eigen::Index>(i)) = inputs.col(val_idx[i]);
    val_labels[i] = label_of(val_idx[i]);
  }
  auto validation_loss = [&](const Mlp& net) {
    return balanced_bce(net.forward(val_in).row(0).transpose(), val_labels);
  };

  const double ntrain = ntrain_p + ntrain_q;
  const double w_pos = ntrain_q > 0 ? 0.5 * ntrain / ntrain_q : 0.0;
  const double w_neg = ntrain_p > 0 ? 0.5 * ntrain / ntrain_p : 0.0;

  Mlp& net = est.net();
  Adam adam(net.params().size(), cfg.adam);
  TrainReport report;
  Vector best = net.params();
  report.best_validation_bce = validation_loss(net);
  report.best_epoch = 0;
  report.final_validation_bce = report.best_validation_bce;
  report.epochs.push_back({0, std::numeric_limits<double>::quiet_NaN(), report.best_validation_bce});

  // Validation differences in the first epochs are below sampling noise, so
  // fresh fits only start tracking the best snapshot after a burn-in.
  const int burn_in = warm_start ? 0 : std::min(cfg.min_epochs, cfg.max_epochs);
  const auto batch = static_cast<Eigen::Index>(cfg.batch_size);
  Vector grad(net.params().size());
  Matrix xb;
  int since_best = 0;
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(train_idx.begin(), train_idx.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < train_idx.size(); start += static_cast<std::size_t>(batch)) {
      const auto nb = static_cast<Eigen::Index>(std::min<std::size_t>(batch, train_idx.size() - start));
      xb.resize(inputs.rows(), nb);
      for (Eigen::Index j = 0; j < nb; ++j) xb.col(j) = inputs.col(train_idx[start + j]);
      Mlp::Tape tape;
      const Matrix logits = net.forward(xb, &tape);
      Matrix dlogit(1, nb);
      double loss = 0.0;
      for (Eigen::Index j = 0; j < nb; ++j) {
        const double v = logits(0, j);
        if (label_of(train_idx[start + j]) == 1) {
          loss += w_pos * softplus(-v);
          dlogit(0, j) = w_pos * (1.0 / (1.0 + std::exp(-v)) - 1.0);
        } else {
          loss += w_neg * softplus(v);
          dlogit(0, j) = w_neg * (1.0 / (1.0 + std::exp(-v)));
        }
      }
      loss /= static_cast<double>(nb);
      if (!std::isfinite(loss)) throw TrainingError("ratio estimator training produced a non-finite loss", epoch);
      dlogit /= static_cast<double>(nb);
      grad.setZero();
      net.backward(tape, dlogit, &grad);
      if (cfg.l2 > 0.0) net.add_l2_gradient(cfg.l2, grad);
      adam.step(net.params(), grad);
      loss_sum += loss * static_cast<double>(nb);
    }
    const double val = validation_loss(net);
    if (!std::isfinite(val)) throw TrainingError("ratio estimator validation loss is non-finite", epoch);
    report.epochs.push_back({epoch, loss_sum / ntrain, val});
    report.final_validation_bce = val;
    if (epoch <= burn_in || val < report.best_validation_bce) {
      report.best_validation_bce = val;
      report.best_epoch = epoch;
      best = net.params();
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  net.params() = best;
  return {std::move(est), std::move(report)};
}

}  // namespace eim
