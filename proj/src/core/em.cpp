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

#include "core/em.hpp"

#include "core/errors.hpp"

namespace eim {

Matrix responsibilities(const Gmm& model, const Matrix& data) {
  Matrix r = model.joint_log_densities(data);
  for (Eigen::Index i = 0; i < r.rows(); ++i) {
    const double lse = log_sum_exp(r.row(i).transpose());
    r.row(i) = (r.row(i).array() - lse).exp();
  }
  return r;
}

EmResult run_em_gmm(const Matrix& data, const Gmm& init, const EmConfig& cfg) {
  if (cfg.iterations < 0) throw ConfigError("em: iterations must be non-negative");
  if (cfg.covariance_floor < 0.0) throw ConfigError("em: covariance floor must be non-negative");
  if (data.rows() <= data.cols()) throw InputError("run_em_gmm: need more samples than dimensions");
  if (data.cols() != init.dim()) throw InputError("run_em_gmm: data width does not match the model dimension");

  const Eigen::Index n = data.rows();
  const int k = init.num_components();
  const Vector data_mean = data.colwise().mean().transpose();
  const Matrix centered = data.rowwise() - data_mean.transpose();
  const Matrix data_cov = centered.transpose() * centered / static_cast<double>(n);
  Rng rng(cfg.seed, stream::kEm);

  EmResult result{init, {init.log_density(data).mean()}, {}};
  for (int it = 0; it < cfg.iterations; ++it) {
    const Matrix r = responsibilities(result.model, data);
    const Vector mass = r.colwise().sum().transpose();
    std::vector<Gaussian> comps;
    Vector w(k);
    for (int j = 0; j < k; ++j) {
      Matrix cov;
      Vector mu;
      if (mass[j] < 1e-8) {
        const auto pick = static_cast<Eigen::Index>(rng.uniform() * static_cast<double>(n)) % n;
        mu = data.row(pick).transpose();
        cov = data_cov;
        w[j] = 1.0 / static_cast<double>(n);
        result.events.push_back({it, j, "empty component reseeded from datum " + std::to_string(pick)});
      } else {
        mu = data.transpose() * r.col(j) / mass[j];
        const Matrix c = data.rowwise() - mu.transpose();
        cov = c.transpose() * r.col(j).asDiagonal() * c / mass[j];
        w[j] = mass[j] / static_cast<double>(n);
      }
      cov = 0.5 * (cov + cov.transpose());
      cov.diagonal().array() += cfg.covariance_floor;
      comps.emplace_back(std::move(mu), cov);
    }
    w /= w.sum();
    result.model = Gmm(std::move(comps), Categorical(w));
    result.log_likelihood.push_back(result.model.log_density(data).mean());
  }
  return result;
}

}  // namespace eim
