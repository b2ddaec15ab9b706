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

#include "core/fgan.hpp"

#include <cmath>

#include "core/errors.hpp"
#include "core/eval.hpp"
#include "core/gmm_reparam.hpp"
#include "core/ratio_estimator.hpp"

namespace eim {
namespace {

double g_activation(double v) { return -std::exp(-v); }
double f_conjugate(double t) { return -1.0 - std::log(-t); }
double f_generator(double u) { return -std::log(u); }
double f_derivative(double u) { return -1.0 / u; }

}  // namespace

void GanConfig::validate() const {
  if (iterations < 0) throw ConfigError("fgan: iterations must be non-negative");
  if (generator_steps <= 0 || discriminator_steps <= 0 || batch_size <= 0) {
    throw ConfigError("fgan: step counts and batch size must be positive");
  }
  if (eval_every < 0 || eval_samples <= 0 || divergence_patience <= 0) throw ConfigError("fgan: invalid evaluation settings");
  if (l2 < 0.0) throw ConfigError("fgan: l2 must be non-negative");
}

double fgan_objective(const Vector& v_p, const Vector& v_q) {
  double ep = 0.0, eq = 0.0;
  for (double v : v_p) ep += g_activation(v);
  for (double v : v_q) eq += f_conjugate(g_activation(v));
  return ep / static_cast<double>(v_p.size()) - eq / static_cast<double>(v_q.size());
}

double bgan_objective(const Vector& rl_p, const Vector& rl_q) {
  double ep = 0.0, eq = 0.0;
  for (double v : rl_p) ep += f_derivative(std::exp(v));
  for (double v : rl_q) {
    const double r = std::exp(v);
    eq += f_derivative(r) * r - f_generator(r);
  }
  return ep / static_cast<double>(rl_p.size()) - eq / static_cast<double>(rl_q.size());
}

GanResult run_fgan_gmm(const Matrix& data, const Gmm& init, const GanConfig& cfg) {
  cfg.validate();
  if (data.rows() == 0) throw InputError("run_fgan_gmm: empty data");
  if (data.cols() != init.dim()) throw InputError("run_fgan_gmm: data width does not match the model dimension");
  const int d = init.dim();
  Rng rng(cfg.seed, stream::kGradient);
  Rng init_rng(cfg.seed, stream::kInitialization);

  TrainConfig tc;
  tc.hidden = cfg.hidden;
  tc.activation = cfg.activation;
  RatioEstimator disc(d, 0, tc, std::nullopt, init_rng);
  const Vector mean = data.colwise().mean().transpose();
  const Vector sd = ((data.rowwise() - mean.transpose()).array().square().colwise().mean().sqrt().max(1e-8)).transpose();
  disc.set_normalization(mean, sd);
  if (cfg.fixed_discriminator) disc.net().params().setZero();
  Adam d_adam(disc.net().params().size(), cfg.discriminator);

  GmmReparam par(init);
  Adam g_adam(par.params().size(), cfg.generator);
  std::optional<double> baseline;
  const auto batch = static_cast<std::size_t>(cfg.batch_size);

  GanResult result{init, {}, false};
  double initial = std::numeric_limits<double>::quiet_NaN();
  if (cfg.target) {
    initial = mc_i_projection(init, *cfg.target, static_cast<std::size_t>(cfg.eval_samples),
                              Rng(cfg.seed).derive(stream::kEvaluation).key())
                  .value;
  }
  int over = 0;

  for (int it = 0; it < cfg.iterations; ++it) {
    GanRecord rec;
    rec.iteration = it;
    if (!cfg.fixed_discriminator) {
      for (int s = 0; s < cfg.discriminator_steps; ++s) {
        Matrix p(static_cast<Eigen::Index>(batch), d);
        for (Eigen::Index j = 0; j < p.rows(); ++j) {
          p.row(j) = data.row(static_cast<Eigen::Index>(rng.uniform() * static_cast<double>(data.rows())) % data.rows());
        }
        const Matrix q = par.sample(batch, rng).x;
        // Minimize E_p[exp(-V)] + E_q[V].
        Mlp::Tape tp, tq;
        const Matrix vp = disc.net().forward(disc.assemble(p), &tp);
        const Matrix vq = disc.net().forward(disc.assemble(q), &tq);
        Vector grad = Vector::Zero(disc.net().params().size());
        const Matrix gp = -(-vp.array()).exp() / static_cast<double>(p.rows());
        const Matrix gq = Matrix::Constant(1, q.rows(), 1.0 / static_cast<double>(q.rows()));
        disc.net().backward(tp, gp, &grad);
        disc.net().backward(tq, gq, &grad);
        if (cfg.l2 > 0.0) disc.net().add_l2_gradient(cfg.l2, grad);
        if (!grad.allFinite()) throw NumericalError("run_fgan_gmm: non-finite discriminator gradient");
        d_adam.step(disc.net().params(), grad);
      }
    }
    for (int s = 0; s < cfg.generator_steps; ++s) {
      // Minimize E_q[1 - V]: pathwise through the components, score function
      // for the coefficients.
      const GmmReparam::Batch b = par.sample(batch, rng);
      const Vector v = disc.forward_logit(b.x);
      const double nb = static_cast<double>(b.x.rows());
      const Vector loss = (1.0 - v.array()).matrix();
      Vector grad = Vector::Zero(par.params().size());
      par.add_pathwise_gradient(b, -disc.input_gradient(b.x) / nb, grad);
      if (!baseline) baseline = loss.mean();
      par.add_score_gradient(b, (loss.array() - *baseline).matrix() / nb, grad);
      *baseline = cfg.baseline_decay * *baseline + (1.0 - cfg.baseline_decay) * loss.mean();
      if (!grad.allFinite()) throw NumericalError("run_fgan_gmm: non-finite generator gradient");
      g_adam.step(par.params(), grad);
      for (int k = 0; k < par.num_components(); ++k) {
        // keep every Cholesky diagonal representable
        const Eigen::Index block = d + d * (d + 1) / 2;
        Eigen::Index o = k * block + d;
        for (int i = 0; i < d; ++i) {
          for (int j = 0; j <= i; ++j, ++o) {
            if (i == j) par.params()[o] = std::max(par.params()[o], -13.0);
          }
        }
      }
    }
    const bool due = cfg.eval_every > 0 && ((it + 1) % cfg.eval_every == 0 || it + 1 == cfg.iterations);
    if (due) {
      result.model = par.to_gmm();
      Rng er(cfg.seed, stream::kEvaluation);
      const Vector vp = disc.forward_logit(data.topRows(std::min<Eigen::Index>(data.rows(), cfg.batch_size)));
      const Vector vq = disc.forward_logit(result.model.sample(batch, er).x);
      rec.objective = fgan_objective(vp, vq);
      if (cfg.target) {
        const McEstimate est = mc_i_projection(result.model, *cfg.target, static_cast<std::size_t>(cfg.eval_samples),
                                               Rng(cfg.seed).derive(stream::kEvaluation, static_cast<std::uint64_t>(it)).key());
        rec.i_projection = est.value;
        rec.i_projection_stderr = est.stderr_;
        over = est.value > cfg.divergence_factor * std::max(initial, 0.0) ? over + 1 : 0;
      }
      result.trace.push_back(rec);
      if (over >= cfg.divergence_patience) {
        result.diverged = true;
        break;
      }
    }
  }
  result.model = par.to_gmm();
  return result;
}

}  // namespace eim
