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

#include "core/eim_gmm.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ostream>

#include "core/errors.hpp"
#include "core/eval.hpp"
#include "core/gmm_reparam.hpp"

namespace eim {
namespace {

constexpr double kMinLogScale = -13.0;

std::uint64_t derived_seed(std::uint64_t seed, std::uint64_t tag, std::uint64_t index) {
  return Rng(seed).derive(tag, index).key();
}

TrainConfig refit_config(const EimGmmConfig& cfg, bool warm) {
  TrainConfig tc = cfg.ratio;
  if (warm) {
    tc.max_epochs = cfg.ratio_epochs_per_iteration;
    tc.patience = std::min(tc.patience, std::max(1, cfg.ratio_epochs_per_iteration));
  }
  return tc;
}

void clamp_scales(GmmReparam& par) {
  // keep diagonal Cholesky entries above the Gaussian pivot floor
  const int d = par.dim();
  const Eigen::Index block = d + d * (d + 1) / 2;
  for (int k = 0; k < par.num_components(); ++k) {
    Eigen::Index o = k * block + d;
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j <= i; ++j, ++o) {
        if (i == j) par.params()[o] = std::max(par.params()[o], kMinLogScale);
      }
    }
  }
}

void evaluate_record(IterationRecord& rec, const Gmm& model, const EimGmmConfig& cfg, int it) {
  const bool due = cfg.eval_every > 0 && ((it + 1) % cfg.eval_every == 0 || it + 1 == cfg.iterations);
  if (!due) return;
  if (cfg.target) {
    const McEstimate est = mc_i_projection(model, *cfg.target, static_cast<std::size_t>(cfg.eval_samples),
                                           derived_seed(cfg.seed, stream::kEvaluation, static_cast<std::uint64_t>(it)));
    rec.i_projection = est.value;
    rec.i_projection_stderr = est.stderr_;
  } else if (cfg.test_data.rows() > 0) {
    rec.test_log_likelihood = mean_log_likelihood(model, cfg.test_data);
  }
}

}  // namespace

std::string to_string(EimVariant v) {
  switch (v) {
    case EimVariant::kEim: return "eim";
    case EimVariant::kNoKl: return "eim-no-kl";
    case EimVariant::kJoint: return "eim-joint";
    case EimVariant::kJointNoKl: return "eim-joint-no-kl";
  }
  return "unknown";
}

void EimGmmConfig::validate() const {
  if (iterations < 0) throw ConfigError("eim: iterations must be non-negative");
  if (samples_per_component <= 0) throw ConfigError("eim: samples per component must be positive");
  if (ratio_epochs_per_iteration <= 0) throw ConfigError("eim: ratio epochs per iteration must be positive");
  if (eval_samples <= 0) throw ConfigError("eim: eval samples must be positive");
  if (joint.steps_per_iteration <= 0 || joint.batch_size <= 0) throw ConfigError("joint: counts must be positive");
  component_tr.validate();
  coefficient_tr.validate();
  ratio.validate();
}

double mean_log_likelihood(const Gmm& model, const Matrix& data) { return model.log_density(data).mean(); }

Vector upper_bound_integrand(const Gmm& q, const Gmm& q_old, const Matrix& xs, const Vector& log_p) {
  if (q.dim() != q_old.dim() || q.num_components() != q_old.num_components() || xs.cols() != q.dim()) {
    throw InputError("upper_bound_integrand: model shapes differ");
  }
  if (log_p.size() != xs.rows()) throw InputError("upper_bound_integrand: log_p/sample count mismatch");
  const Matrix jq = q.joint_log_densities(xs), jo = q_old.joint_log_densities(xs);
  Vector out(xs.rows());
  for (Eigen::Index r = 0; r < xs.rows(); ++r) {
    const double norm_old = log_sum_exp(jo.row(r).transpose());
    double s = 0.0;
    for (Eigen::Index z = 0; z < jq.cols(); ++z) {
      if (!std::isfinite(jq(r, z))) continue;
      s += std::exp(jq(r, z)) * (jq(r, z) - log_p[r] - (jo(r, z) - norm_old));
    }
    out[r] = s;
  }
  return out;
}

Gmm init_gmm_from_data(const Matrix& data, int components, std::uint64_t seed) {
  if (data.rows() <= data.cols()) throw InputError("init_gmm_from_data: need more samples than dimensions");
  if (components <= 0) throw InputError("init_gmm_from_data: components must be positive");
  Rng rng(seed, stream::kInitialization);
  const Eigen::Index n = data.rows();
  std::vector<Eigen::Index> centers;
  centers.push_back(static_cast<Eigen::Index>(rng.uniform() * static_cast<double>(n)) % n);
  Vector d2 = (data.rowwise() - data.row(centers[0])).rowwise().squaredNorm();
  while (static_cast<int>(centers.size()) < components) {
    const double total = d2.sum();
    Eigen::Index pick = n - 1;
    if (total > 0.0) {
      double u = rng.uniform() * total;
      for (Eigen::Index i = 0; i < n; ++i) {
        u -= d2[i];
        if (u < 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<Eigen::Index>(rng.uniform() * static_cast<double>(n)) % n;
    }
    centers.push_back(pick);
    d2 = d2.cwiseMin((data.rowwise() - data.row(pick)).rowwise().squaredNorm());
  }
  const Vector mean = data.colwise().mean().transpose();
  const Matrix centered = data.rowwise() - mean.transpose();
  Matrix cov = centered.transpose() * centered / static_cast<double>(n);
  cov.diagonal().array() += 1e-6;
  std::vector<Gaussian> comps;
  for (Eigen::Index c : centers) comps.emplace_back(data.row(c).transpose(), cov);
  return Gmm(std::move(comps), Categorical::uniform(components));
}

EimResult run_eim_gmm(const Matrix& data, const Gmm& init, const EimGmmConfig& cfg,
                      const std::function<void(const IterationDetail&)>& observer) {
  return run_eim_ablation(data, init, cfg, EimVariant::kEim, observer);
}

EimResult run_eim_ablation(const Matrix& data, const Gmm& init, const EimGmmConfig& cfg, EimVariant variant,
                           const std::function<void(const IterationDetail&)>& observer) {
  cfg.validate();
  if (data.rows() == 0) throw InputError("run_eim_gmm: empty data");
  if (data.cols() != init.dim()) throw InputError("run_eim_gmm: data width does not match the model dimension");

  const bool penalty = variant == EimVariant::kEim || variant == EimVariant::kJoint;
  const bool joint = variant == EimVariant::kJoint || variant == EimVariant::kJointNoKl;
  TrustRegionConfig comp_tr = cfg.component_tr, coeff_tr = cfg.coefficient_tr;
  comp_tr.kl_penalty = coeff_tr.kl_penalty = penalty;

  EimResult result{init, {}, std::nullopt, 0};
  const int k = init.num_components();
  const auto n_comp = static_cast<std::size_t>(cfg.samples_per_component);

  std::optional<GmmReparam> par;
  std::optional<Adam> adam;
  std::optional<double> baseline;
  if (joint) {
    par.emplace(init);
    adam.emplace(par->params().size(), cfg.joint.adam);
  }

  for (int it = 0; it < cfg.iterations; ++it) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto uit = static_cast<std::uint64_t>(it);
    const Gmm old = result.model;

    // E-step: fresh model samples, refit the density ratio estimator.
    Rng model_rng = Rng(cfg.seed).derive(stream::kModelSamples, uit);
    const Matrix q_samples = old.sample(static_cast<std::size_t>(data.rows()), model_rng).x;
    const bool warm = result.ratio.has_value();
    RatioTrainResult fit = train_ratio(data, q_samples, refit_config(cfg, warm), cfg.features,
                                       derived_seed(cfg.seed, stream::kRatioTraining, uit),
                                       warm ? &*result.ratio : nullptr);
    result.ratio.emplace(std::move(fit.estimator));
    const RatioEstimator& ratio = *result.ratio;

    IterationRecord rec;
    rec.iteration = it;
    rec.ratio_validation_bce = fit.report.best_validation_bce;

    std::vector<Matrix> samples(k);
    std::vector<Vector> logits(k);
    for (int i = 0; i < k; ++i) {
      Rng r = Rng(cfg.seed).derive(stream::kComponentSamples, uit * 1024 + static_cast<std::uint64_t>(i));
      samples[i] = old.component(i).sample(n_comp, r);
      logits[i] = ratio.log_ratios(samples[i]);
      if (!logits[i].allFinite()) throw NumericalError("run_eim_gmm: non-finite logits from the ratio estimator");
      rec.expected_logits.push_back(logits[i].mean());
    }
    rec.coefficient_losses = rec.expected_logits;
    if (cfg.resample_coefficients) {
      for (int i = 0; i < k; ++i) {
        Rng r = Rng(cfg.seed).derive(stream::kCoefficientSamples, uit * 1024 + static_cast<std::uint64_t>(i));
        rec.coefficient_losses[i] = ratio.log_ratios(old.component(i).sample(n_comp, r)).mean();
      }
    }

    if (!joint) {
      // M-step coefficients, then components; both against the snapshot.
      Categorical weights = old.weights();
      if (cfg.update_coefficients && k > 1) {
        const Vector losses = Eigen::Map<const Vector>(rec.coefficient_losses.data(), k);
        CategoricalUpdate cu = categorical_more_update(old.weights(), losses, coeff_tr);
        weights = cu.distribution;
        rec.coefficient_kl = cu.dual.kl;
        rec.coefficient_eta = cu.dual.eta;
      }
      std::vector<Gaussian> comps = old.components();
      for (int i = 0; i < k; ++i) {
        double kl = 0.0, eta = 0.0;
        int accepted = 1;
        if (cfg.update_components) {
          const QuadraticSurrogate s = fit_surrogate_whitened(samples[i], logits[i], old.component(i), cfg.surrogate_ridge);
          GaussianUpdate gu = gaussian_more_update(old.component(i), s, comp_tr);
          if (gu.accepted) {
            comps[i] = std::move(gu.distribution);
            kl = gu.dual.kl;
            eta = gu.dual.eta;
          } else {
            accepted = 0;
            ++result.rejected_updates;
          }
        }
        rec.component_kls.push_back(kl);
        rec.component_etas.push_back(eta);
        rec.component_accepted.push_back(accepted);
      }
      result.model = Gmm(std::move(comps), std::move(weights));
    } else {
      Rng grad_rng = Rng(cfg.seed).derive(stream::kGradient, uit);
      const auto batch = static_cast<std::size_t>(cfg.joint.batch_size);
      for (int step = 0; step < cfg.joint.steps_per_iteration; ++step) {
        const GmmReparam::Batch b = par->sample(batch, grad_rng);
        const Vector phi = ratio.log_ratios(b.x);
        const double nb = static_cast<double>(b.x.rows());
        Vector grad = Vector::Zero(par->params().size());
        par->add_pathwise_gradient(b, ratio.input_gradient(b.x) / nb, grad);
        if (!baseline) baseline = phi.mean();
        par->add_score_gradient(b, (phi.array() - *baseline).matrix() / nb, grad);
        *baseline = cfg.joint.baseline_decay * *baseline + (1.0 - cfg.joint.baseline_decay) * phi.mean();
        if (penalty) par->add_kl_penalty(old, grad);
        if (!grad.allFinite()) throw NumericalError("joint EIM: non-finite gradient");
        adam->step(par->params(), grad);
        clamp_scales(*par);
      }
      result.model = par->to_gmm();
      for (int i = 0; i < k; ++i) {
        rec.component_kls.push_back(kl_gaussian(result.model.component(i), old.component(i)));
        rec.component_etas.push_back(0.0);
        rec.component_accepted.push_back(1);
      }
      rec.coefficient_kl = kl_categorical(result.model.weights(), old.weights());
    }

    if (observer) observer(IterationDetail{it, old, ratio, samples, logits, result.model});
    evaluate_record(rec, result.model, cfg, it);
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.trace.push_back(std::move(rec));
    if (cfg.checkpoint && cfg.checkpoint_every > 0 && (it + 1) % cfg.checkpoint_every == 0) {
      cfg.checkpoint(it + 1, result.model);
    }
  }
  return result;
}

void write_trace_csv(const std::vector<IterationRecord>& trace, std::ostream& os) {
  os << "iteration,metric,index,value\n";
  os.precision(17);
  auto row = [&](int it, const char* metric, int idx, double v) {
    os << it << ',' << metric << ',' << idx << ',' << v << '\n';
  };
  for (const auto& r : trace) {
    for (std::size_t i = 0; i < r.expected_logits.size(); ++i) row(r.iteration, "expected_logit", static_cast<int>(i), r.expected_logits[i]);
    for (std::size_t i = 0; i < r.coefficient_losses.size(); ++i) row(r.iteration, "coefficient_loss", static_cast<int>(i), r.coefficient_losses[i]);
    for (std::size_t i = 0; i < r.component_kls.size(); ++i) row(r.iteration, "component_kl", static_cast<int>(i), r.component_kls[i]);
    for (std::size_t i = 0; i < r.component_etas.size(); ++i) row(r.iteration, "component_eta", static_cast<int>(i), r.component_etas[i]);
    for (std::size_t i = 0; i < r.component_accepted.size(); ++i) row(r.iteration, "component_accepted", static_cast<int>(i), r.component_accepted[i]);
    row(r.iteration, "coefficient_kl", 0, r.coefficient_kl);
    row(r.iteration, "coefficient_eta", 0, r.coefficient_eta);
    row(r.iteration, "ratio_validation_bce", 0, r.ratio_validation_bce);
    if (!std::isnan(r.i_projection)) {
      row(r.iteration, "i_projection", 0, r.i_projection);
      row(r.iteration, "i_projection_stderr", 0, r.i_projection_stderr);
    }
    if (!std::isnan(r.test_log_likelihood)) row(r.iteration, "test_log_likelihood", 0, r.test_log_likelihood);
  }
}

void write_timing_csv(const std::vector<IterationRecord>& trace, std::ostream& os) {
  os << "iteration,wall_seconds\n";
  for (const auto& r : trace) os << r.iteration << ',' << r.wall_seconds << '\n';
}

}  // namespace eim
