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

#include "core/eim_conditional.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <ostream>

#include "core/errors.hpp"

namespace eim {
namespace {

constexpr double kLog2Pi = 1.8378770664093454836;
constexpr double kMassFloor = 1e-6;

Matrix rows_of(const Matrix& m, const std::vector<Eigen::Index>& idx, std::size_t begin, std::size_t end) {
  Matrix out(static_cast<Eigen::Index>(end - begin), m.cols());
  for (std::size_t i = begin; i < end; ++i) out.row(static_cast<Eigen::Index>(i - begin)) = m.row(idx[i]);
  return out;
}

Matrix softmax_columns(Matrix logits) {
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    logits.col(j) = (logits.col(j).array() - logits.col(j).maxCoeff()).exp();
    logits.col(j) /= logits.col(j).sum();
  }
  return logits;
}

// Writes d/d(raw) for a lower-triangular gradient `gl` into `out` (row-major
// lower triangle, diagonal through the exp chain).
void chol_gradient_to_raw(const Matrix& gl, const Matrix& l, Eigen::Ref<Vector> out) {
  Eigen::Index o = 0;
  const auto d = l.rows();
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j, ++o) out[o] = i == j ? gl(i, i) * l(i, i) : gl(i, j);
  }
}

std::vector<Eigen::Index> shuffled(Eigen::Index n, Rng& rng) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  return idx;
}

TrainConfig refit_config(const TrainConfig& base, int epochs, bool warm) {
  TrainConfig tc = base;
  if (warm) {
    tc.max_epochs = epochs;
    tc.patience = std::min(tc.patience, std::max(1, epochs));
  }
  return tc;
}

double mean_gating_kl(const Matrix& probs, const Matrix& old_probs) {
  double s = 0.0;
  for (Eigen::Index j = 0; j < probs.rows(); ++j) {
    s += kl_categorical(Vector(probs.row(j).transpose()), Vector(old_probs.row(j).transpose()));
  }
  return s / static_cast<double>(probs.rows());
}

}  // namespace

void CondEimConfig::validate() const {
  if (iterations < 0) throw ConfigError("cond: iterations must be non-negative");
  if (epochs <= 0 || batch_size <= 0 || samples_per_context <= 0) throw ConfigError("cond: counts must be positive");
  if (ratio_epochs_per_iteration <= 0) throw ConfigError("cond: ratio epochs per iteration must be positive");
  if (eval_every < 0) throw ConfigError("cond: eval_every must be non-negative");
  ratio.validate();
}

void MlMoeConfig::validate() const {
  if (iterations < 0) throw ConfigError("ml: iterations must be non-negative");
  if (batch_size <= 0) throw ConfigError("ml: batch size must be positive");
  if (eval_every < 0) throw ConfigError("ml: eval_every must be non-negative");
}

OldExpert OldExpert::from(const std::vector<Gaussian>& gs) {
  OldExpert o;
  for (const Gaussian& g : gs) {
    o.mean.push_back(g.mean());
    o.precision.push_back(g.precision());
    o.log_det.push_back(g.log_det_covariance());
  }
  return o;
}

double gating_loss(const MixtureOfExperts& m, const Matrix& contexts, const Matrix& expected_logits,
                   const Matrix& old_probs, Vector* grad) {
  m.check_contexts(contexts);
  const int k = m.num_components();
  const Eigen::Index n = contexts.rows();
  if (expected_logits.rows() != n || expected_logits.cols() != k || old_probs.rows() != n || old_probs.cols() != k) {
    throw InputError("gating_loss: shape mismatch");
  }
  Mlp::Tape tape;
  const Matrix pi = softmax_columns(m.gating().forward(contexts.transpose(), &tape));
  Matrix g_logits(k, n);
  double loss = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    const Vector p = pi.col(j);
    const Vector c = expected_logits.row(j).transpose().array() + (p.array() / old_probs.row(j).transpose().array()).log();
    loss += p.dot(c);
    g_logits.col(j) = (p.array() * (c.array() - p.dot(c))).matrix() / static_cast<double>(n);
  }
  if (grad) m.gating().backward(tape, g_logits, grad);
  return loss / static_cast<double>(n);
}

double component_loss(const MixtureOfExperts& m, int k, const Matrix& contexts, const Matrix& noise,
                      const Vector& weights, const OldExpert& old, const std::vector<Eigen::Index>& rows,
                      const RatioEstimator& ratio, Vector* grad) {
  m.check_contexts(contexts);
  const int d = m.dim();
  const Eigen::Index n = contexts.rows();
  if (noise.rows() != n || noise.cols() != d || weights.size() != n || static_cast<Eigen::Index>(rows.size()) != n) {
    throw InputError("component_loss: shape mismatch");
  }
  Mlp::Tape tape;
  const Matrix out = m.expert(k).forward(contexts.transpose(), &tape);
  const int cw = cholesky_raw_width(d);
  Matrix xs(n, d);
  std::vector<Matrix> chols(static_cast<std::size_t>(n));
  for (Eigen::Index j = 0; j < n; ++j) {
    chols[j] = cholesky_from_raw(out.col(j).tail(cw), d);
    xs.row(j) = (out.col(j).head(d) + chols[j] * noise.row(j).transpose()).transpose();
  }
  if (!xs.allFinite()) throw NumericalError("component_loss: non-finite expert output");
  const Vector phi = ratio.log_ratios(xs, contexts);
  const Matrix gphi = grad ? ratio.input_gradient(xs, contexts) : Matrix();
  const double inv_n = 1.0 / static_cast<double>(n);
  double loss = 0.0;
  Matrix g_out(out.rows(), n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto r = static_cast<std::size_t>(rows[static_cast<std::size_t>(j)]);
    const Matrix& l = chols[j];
    const Vector mu = out.col(j).head(d);
    const Vector diff = mu - old.mean[r];
    const Matrix pl = old.precision[r] * l;
    const double log_det = 2.0 * l.diagonal().array().log().sum();
    const double kl = 0.5 * ((pl.cwiseProduct(l)).sum() + diff.dot(old.precision[r] * diff) - d + old.log_det[r] - log_det);
    loss += weights[j] * (phi[j] + kl);
    if (grad) {
      const double w = weights[j] * inv_n;
      g_out.col(j).head(d) = w * (gphi.row(j).transpose() + old.precision[r] * diff);
      Matrix gl = gphi.row(j).transpose() * noise.row(j) + pl;
      gl.diagonal() -= l.diagonal().cwiseInverse();
      chol_gradient_to_raw(w * gl, l, g_out.col(j).tail(cw));
    }
  }
  if (grad) m.expert(k).backward(tape, g_out, grad);
  return loss * inv_n;
}

double ml_loss(const MixtureOfExperts& m, const Matrix& contexts, const Matrix& xs, std::vector<Vector>* grads) {
  m.check_contexts(contexts);
  const int d = m.dim(), k = m.num_components(), cw = cholesky_raw_width(d);
  const Eigen::Index n = contexts.rows();
  if (xs.rows() != n || xs.cols() != d) throw InputError("ml_loss: shape mismatch");
  const Matrix ct = contexts.transpose();
  Mlp::Tape gtape;
  const Matrix logits = m.gating().forward(ct, &gtape);
  std::vector<Mlp::Tape> tapes(static_cast<std::size_t>(k));
  std::vector<Matrix> outs;
  for (int i = 0; i < k; ++i) outs.push_back(m.expert(i).forward(ct, &tapes[static_cast<std::size_t>(i)]));

  Matrix joint(k, n);
  std::vector<std::vector<Vector>> vs(static_cast<std::size_t>(k), std::vector<Vector>(static_cast<std::size_t>(n)));
  for (Eigen::Index j = 0; j < n; ++j) {
    const double lse_g = log_sum_exp(logits.col(j));
    for (int i = 0; i < k; ++i) {
      const Matrix l = cholesky_from_raw(outs[i].col(j).tail(cw), d);
      const Vector v = l.triangularView<Eigen::Lower>().solve(xs.row(j).transpose() - outs[i].col(j).head(d));
      vs[i][j] = v;
      joint(i, j) = logits(i, j) - lse_g - 0.5 * v.squaredNorm() - l.diagonal().array().log().sum() - 0.5 * d * kLog2Pi;
    }
  }
  if (!joint.allFinite()) throw NumericalError("ml_loss: non-finite log densities");
  double loss = 0.0;
  Matrix g_logits(k, n);
  std::vector<Matrix> g_out(static_cast<std::size_t>(k), Matrix(outs[0].rows(), n));
  const double inv_n = 1.0 / static_cast<double>(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const double lse = log_sum_exp(joint.col(j));
    loss -= lse;
    if (!grads) continue;
    const Vector resp = (joint.col(j).array() - lse).exp();
    const Vector pi = softmax_columns(logits.col(j));
    g_logits.col(j) = -(resp - pi) * inv_n;
    for (int i = 0; i < k; ++i) {
      const Matrix l = cholesky_from_raw(outs[i].col(j).tail(cw), d);
      const Vector& v = vs[i][j];
      const Vector lt_v = l.transpose().triangularView<Eigen::Upper>().solve(v);
      const double w = -resp[i] * inv_n;
      g_out[i].col(j).head(d) = w * lt_v;
      Matrix gl = lt_v * v.transpose();
      gl.diagonal() -= l.diagonal().cwiseInverse();
      chol_gradient_to_raw(w * gl, l, g_out[i].col(j).tail(cw));
    }
  }
  if (grads) {
    grads->assign(static_cast<std::size_t>(k + 1), Vector());
    (*grads)[0] = Vector::Zero(m.gating().params().size());
    m.gating().backward(gtape, g_logits, &(*grads)[0]);
    for (int i = 0; i < k; ++i) {
      (*grads)[i + 1] = Vector::Zero(m.expert(i).params().size());
      m.expert(i).backward(tapes[static_cast<std::size_t>(i)], g_out[i], &(*grads)[i + 1]);
    }
  }
  return loss * inv_n;
}

MoeResult run_eim_moe(const Matrix& contexts, const Matrix& xs, const MixtureOfExperts& init,
                      const CondEimConfig& cfg) {
  cfg.validate();
  init.check_contexts(contexts);
  if (xs.rows() != contexts.rows() || xs.rows() == 0 || xs.cols() != init.dim()) {
    throw InputError("run_eim_moe: dataset shape mismatch");
  }
  const int k = init.num_components(), d = init.dim();
  const Eigen::Index n = xs.rows();
  MoeResult result{init, {}, std::nullopt};
  MixtureOfExperts& model = result.model;
  Adam gating_adam(model.gating().params().size(), cfg.gating_adam);
  std::vector<Adam> expert_adams;
  for (int i = 0; i < k; ++i) expert_adams.emplace_back(model.expert(i).params().size(), cfg.component_adam);
  const auto batch = static_cast<std::size_t>(cfg.batch_size);

  for (int it = 0; it < cfg.iterations; ++it) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto uit = static_cast<std::uint64_t>(it);
    const Rng base = Rng(cfg.seed).derive(uit);
    const MixtureOfExperts old = model;
    const Matrix old_probs = old.gating_probs(contexts);
    std::vector<OldExpert> old_experts;
    for (int i = 0; i < k; ++i) old_experts.push_back(OldExpert::from(old.expert_gaussians(i, contexts)));

    // One model sample per data context, then refit phi(x, y).
    Rng sample_rng = base.derive(stream::kModelSamples);
    const Matrix model_x = old.sample(contexts, sample_rng).x;
    const bool warm = result.ratio.has_value();
    RatioTrainResult fit = train_ratio(xs, model_x, refit_config(cfg.ratio, cfg.ratio_epochs_per_iteration, warm),
                                       cfg.features, base.derive(stream::kRatioTraining).key(),
                                       warm ? &*result.ratio : nullptr, contexts, contexts);
    result.ratio.emplace(std::move(fit.estimator));
    const RatioEstimator& ratio = *result.ratio;

    MoeIterationRecord rec;
    rec.iteration = it;
    rec.ratio_validation_bce = fit.report.best_validation_bce;
    rec.component_losses.assign(static_cast<std::size_t>(k), 0.0);

    auto gating_step = [&]() {
      Rng rng = base.derive(stream::kCoefficientSamples);
      Matrix expected = Matrix::Zero(n, k);
      for (int i = 0; i < k; ++i) {
        const std::vector<Gaussian> gs = model.expert_gaussians(i, contexts);
        for (int s = 0; s < cfg.samples_per_context; ++s) {
          Matrix x(n, d);
          for (Eigen::Index j = 0; j < n; ++j) x.row(j) = gs[j].sample(1, rng);
          expected.col(i) += ratio.log_ratios(x, contexts);
        }
      }
      expected /= static_cast<double>(cfg.samples_per_context);
      if (!expected.allFinite()) throw NumericalError("run_eim_moe: non-finite expected logits");
      if (!cfg.weight_inside) expected.rowwise() = expected.colwise().mean().eval();
      for (int e = 0; e < cfg.epochs; ++e) {
        const std::vector<Eigen::Index> idx = shuffled(n, rng);
        for (std::size_t b = 0; b < idx.size(); b += batch) {
          const std::size_t end = std::min(idx.size(), b + batch);
          Vector grad = Vector::Zero(model.gating().params().size());
          gating_loss(model, rows_of(contexts, idx, b, end), rows_of(expected, idx, b, end),
                      rows_of(old_probs, idx, b, end), &grad);
          if (!grad.allFinite()) throw NumericalError("run_eim_moe: non-finite gating gradient");
          gating_adam.step(model.gating().params(), grad);
        }
      }
      rec.gating_loss = gating_loss(model, contexts, expected, old_probs, nullptr);
    };

    auto component_step = [&]() {
      const Matrix probs = model.gating_probs(contexts);
      for (int i = 0; i < k; ++i) {
        const double mass = std::max(probs.col(i).mean(), kMassFloor);
        const Vector weights = probs.col(i) / mass;
        Rng rng = base.derive(stream::kGradient, static_cast<std::uint64_t>(i));
        double last_epoch = 0.0;
        for (int e = 0; e < cfg.epochs; ++e) {
          const std::vector<Eigen::Index> idx = shuffled(n, rng);
          double epoch_loss = 0.0;
          for (std::size_t b = 0; b < idx.size(); b += batch) {
            const std::size_t end = std::min(idx.size(), b + batch);
            const std::vector<Eigen::Index> rows(idx.begin() + static_cast<std::ptrdiff_t>(b),
                                                 idx.begin() + static_cast<std::ptrdiff_t>(end));
            Matrix noise(static_cast<Eigen::Index>(end - b), d);
            for (Eigen::Index r = 0; r < noise.rows(); ++r)
              for (int c = 0; c < d; ++c) noise(r, c) = rng.normal();
            Vector w(noise.rows());
            for (Eigen::Index r = 0; r < w.size(); ++r) w[r] = weights[rows[static_cast<std::size_t>(r)]];
            Vector grad = Vector::Zero(model.expert(i).params().size());
            epoch_loss += component_loss(model, i, rows_of(contexts, idx, b, end), noise, w, old_experts[i], rows,
                                         ratio, &grad) *
                          static_cast<double>(end - b);
            if (!grad.allFinite()) throw NumericalError("run_eim_moe: non-finite component gradient");
            expert_adams[i].step(model.expert(i).params(), grad);
          }
          last_epoch = epoch_loss / static_cast<double>(n);
        }
        rec.component_losses[i] = last_epoch;
      }
    };

    if (cfg.gating_first) {
      gating_step();
      component_step();
    } else {
      component_step();
      gating_step();
    }

    rec.expected_gating_kl = mean_gating_kl(model.gating_probs(contexts), old_probs);
    if (!std::isfinite(rec.expected_gating_kl)) throw NumericalError("run_eim_moe: non-finite gating KL");
    for (int i = 0; i < k; ++i) {
      const std::vector<Gaussian> gs = model.expert_gaussians(i, contexts);
      const std::vector<Gaussian> og = old.expert_gaussians(i, contexts);
      double s = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) s += kl_gaussian(gs[j], og[j]);
      rec.component_kls.push_back(s / static_cast<double>(n));
    }
    const bool due = cfg.eval_every > 0 && ((it + 1) % cfg.eval_every == 0 || it + 1 == cfg.iterations);
    if (due) {
      rec.train_log_likelihood = model.log_density(contexts, xs).mean();
      if (cfg.test_samples.rows() > 0) {
        rec.test_log_likelihood = model.log_density(cfg.test_contexts, cfg.test_samples).mean();
      }
    }
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.trace.push_back(std::move(rec));
    if (cfg.observer) cfg.observer(it, model);
  }
  return result;
}

MoeResult run_ml_moe(const Matrix& contexts, const Matrix& xs, const MixtureOfExperts& init, const MlMoeConfig& cfg) {
  cfg.validate();
  init.check_contexts(contexts);
  if (xs.rows() != contexts.rows() || xs.rows() == 0 || xs.cols() != init.dim()) {
    throw InputError("run_ml_moe: dataset shape mismatch");
  }
  const int k = init.num_components();
  const Eigen::Index n = xs.rows();
  MoeResult result{init, {}, std::nullopt};
  MixtureOfExperts& model = result.model;
  std::vector<Adam> adams;
  adams.emplace_back(model.gating().params().size(), cfg.adam);
  for (int i = 0; i < k; ++i) adams.emplace_back(model.expert(i).params().size(), cfg.adam);
  const auto batch = static_cast<std::size_t>(cfg.batch_size);
  Rng rng(cfg.seed, stream::kGradient);

  for (int it = 0; it < cfg.iterations; ++it) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::vector<Eigen::Index> idx = shuffled(n, rng);
    for (std::size_t b = 0; b < idx.size(); b += batch) {
      const std::size_t end = std::min(idx.size(), b + batch);
      std::vector<Vector> grads;
      ml_loss(model, rows_of(contexts, idx, b, end), rows_of(xs, idx, b, end), &grads);
      for (const Vector& g : grads) {
        if (!g.allFinite()) throw NumericalError("run_ml_moe: non-finite gradient");
      }
      adams[0].step(model.gating().params(), grads[0]);
      for (int i = 0; i < k; ++i) adams[i + 1].step(model.expert(i).params(), grads[i + 1]);
    }
    MoeIterationRecord rec;
    rec.iteration = it;
    const bool due = cfg.eval_every > 0 && ((it + 1) % cfg.eval_every == 0 || it + 1 == cfg.iterations);
    if (due) {
      rec.train_log_likelihood = -ml_loss(model, contexts, xs, nullptr);
      if (cfg.test_samples.rows() > 0) {
        rec.test_log_likelihood = model.log_density(cfg.test_contexts, cfg.test_samples).mean();
      }
    }
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.trace.push_back(std::move(rec));
    if (cfg.observer) cfg.observer(it, model);
  }
  return result;
}

void write_moe_trace_csv(const std::vector<MoeIterationRecord>& trace, std::ostream& os) {
  os << "iteration,metric,index,value\n";
  os.precision(17);
  auto row = [&](int it, const char* metric, std::size_t idx, double v) {
    if (!std::isnan(v)) os << it << ',' << metric << ',' << idx << ',' << v << '\n';
  };
  for (const auto& r : trace) {
    row(r.iteration, "gating_loss", 0, r.gating_loss);
    row(r.iteration, "expected_gating_kl", 0, r.expected_gating_kl);
    for (std::size_t i = 0; i < r.component_losses.size(); ++i) row(r.iteration, "component_loss", i, r.component_losses[i]);
    for (std::size_t i = 0; i < r.component_kls.size(); ++i) row(r.iteration, "component_kl", i, r.component_kls[i]);
    row(r.iteration, "ratio_validation_bce", 0, r.ratio_validation_bce);
    row(r.iteration, "train_log_likelihood", 0, r.train_log_likelihood);
    row(r.iteration, "test_log_likelihood", 0, r.test_log_likelihood);
  }
}

}  // namespace eim
