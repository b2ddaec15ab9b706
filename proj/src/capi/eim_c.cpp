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

#include "eim/eim.h"

#include <cstring>
#include <sstream>
#include <string>

#include "core/config.hpp"
#include "core/errors.hpp"
#include "core/eval.hpp"
#include "core/runner.hpp"
#include "core/serialization.hpp"

struct eim_config {
  eim::Config cfg;
};

struct eim_gmm {
  eim::Gmm model;
};

namespace {

thread_local std::string g_last_error;

eim_status status_of(eim::ErrorKind k) {
  switch (k) {
    case eim::ErrorKind::kInput: return EIM_ERR_INPUT;
    case eim::ErrorKind::kDomain: return EIM_ERR_INPUT;
    case eim::ErrorKind::kNumerical: return EIM_ERR_NUMERICAL;
    case eim::ErrorKind::kTraining: return EIM_ERR_NUMERICAL;
    case eim::ErrorKind::kConfig: return EIM_ERR_CONFIG;
    case eim::ErrorKind::kIo: return EIM_ERR_IO;
    case eim::ErrorKind::kUnsupported: return EIM_ERR_UNSUPPORTED;
  }
  return EIM_ERR_INTERNAL;
}

template <class F>
eim_status guarded(F&& f) {
  try {
    f();
    g_last_error.clear();
    return EIM_OK;
  } catch (const eim::Error& e) {
    g_last_error = e.what();
    return status_of(e.kind());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return EIM_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return EIM_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return EIM_ERR_INTERNAL;
  }
}

void require(bool ok, const char* what) {
  if (!ok) throw eim::InputError(what);
}

void copy_out(const std::string& s, char* buf, size_t size, size_t* needed) {
  if (needed) *needed = s.size() + 1;
  if (!buf) return;
  if (size < s.size() + 1) throw eim::InputError("output buffer too small");
  std::memcpy(buf, s.c_str(), s.size() + 1);
}

}  // namespace

extern "C" {

const char* eim_last_error(void) { return g_last_error.c_str(); }

const char* eim_version(void) { return "1.0.0"; }

eim_status eim_config_create(eim_config** out) {
  return guarded([&] {
    require(out != nullptr, "eim_config_create: null output");
    *out = new eim_config{};
  });
}

void eim_config_free(eim_config* cfg) { delete cfg; }

eim_status eim_config_load(eim_config* cfg, const char* path) {
  return guarded([&] {
    require(cfg && path, "eim_config_load: null argument");
    cfg->cfg.merge_file(path);
  });
}

eim_status eim_config_set(eim_config* cfg, const char* key, const char* value) {
  return guarded([&] {
    require(cfg && key && value, "eim_config_set: null argument");
    cfg->cfg.set(key, value);
  });
}

eim_status eim_config_get(const eim_config* cfg, const char* key, char* buf, size_t size, size_t* needed) {
  return guarded([&] {
    require(cfg && key, "eim_config_get: null argument");
    copy_out(cfg->cfg.get(key), buf, size, needed);
  });
}

eim_status eim_config_dump(const eim_config* cfg, char* buf, size_t size, size_t* needed) {
  return guarded([&] {
    require(cfg != nullptr, "eim_config_dump: null argument");
    copy_out(cfg->cfg.snapshot(), buf, size, needed);
  });
}

eim_status eim_gen_data(const eim_config* cfg, const char* out_dir) {
  return guarded([&] {
    require(cfg && out_dir, "eim_gen_data: null argument");
    eim::cmd_gen_data(cfg->cfg, out_dir);
  });
}

eim_status eim_fit(const eim_config* cfg, const char* task_dir, const char* out_dir) {
  return guarded([&] {
    require(cfg && task_dir && out_dir, "eim_fit: null argument");
    eim::cmd_fit(cfg->cfg, task_dir, out_dir);
  });
}

eim_status eim_eval(const char* model_path, const char* task_dir, const char* metrics, size_t n, uint64_t seed,
                    const char* out_csv, char* buf, size_t size, size_t* needed) {
  return guarded([&] {
    require(model_path && task_dir, "eim_eval: null argument");
    std::vector<std::string> list;
    if (metrics) {
      std::stringstream ss(metrics);
      std::string item;
      while (std::getline(ss, item, ',')) {
        if (!item.empty()) list.push_back(item);
      }
    }
    const auto rows = eim::cmd_eval(model_path, task_dir, list, n, seed, out_csv ? out_csv : "");
    if (buf || needed) {
      std::ostringstream os;
      os << "method,task,seed,metric,value,stderr,n,config_hash\n";
      os.precision(17);
      for (const auto& r : rows) {
        os << r.method << ',' << r.task << ',' << r.seed << ',' << r.metric << ',' << r.value << ',' << r.stderr_ << ','
           << r.n << ',' << r.config_hash << '\n';
      }
      copy_out(os.str(), buf, size, needed);
    }
  });
}

eim_status eim_sweep(const eim_config* cfg, const char* out_dir, size_t* rows) {
  return guarded([&] {
    require(cfg && out_dir, "eim_sweep: null argument");
    const std::size_t n = eim::cmd_sweep(cfg->cfg, out_dir);
    if (rows) *rows = n;
  });
}

eim_status eim_gmm_create(int dim, int components, const double* weights, const double* means,
                          const double* covariances, eim_gmm** out) {
  return guarded([&] {
    require(out && weights && means && covariances, "eim_gmm_create: null argument");
    require(dim > 0 && components > 0, "eim_gmm_create: dim and components must be positive");
    std::vector<eim::Gaussian> comps;
    for (int k = 0; k < components; ++k) {
      const eim::Vector mu = Eigen::Map<const eim::Vector>(means + static_cast<std::ptrdiff_t>(k) * dim, dim);
      const eim::Matrix cov = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
          covariances + static_cast<std::ptrdiff_t>(k) * dim * dim, dim, dim);
      comps.emplace_back(mu, cov);
    }
    eim::Categorical w(Eigen::Map<const eim::Vector>(weights, components));
    *out = new eim_gmm{eim::Gmm(std::move(comps), std::move(w))};
  });
}

eim_status eim_gmm_load(const char* path, eim_gmm** out) {
  return guarded([&] {
    require(path && out, "eim_gmm_load: null argument");
    *out = new eim_gmm{eim::gmm_from_json(eim::read_json_file(path))};
  });
}

eim_status eim_gmm_save(const eim_gmm* gmm, const char* path) {
  return guarded([&] {
    require(gmm && path, "eim_gmm_save: null argument");
    eim::write_text_file(path, eim::dump(eim::to_json(gmm->model)));
  });
}

void eim_gmm_free(eim_gmm* gmm) { delete gmm; }

int eim_gmm_dim(const eim_gmm* gmm) { return gmm ? gmm->model.dim() : -1; }

int eim_gmm_components(const eim_gmm* gmm) { return gmm ? gmm->model.num_components() : -1; }

eim_status eim_gmm_log_density(const eim_gmm* gmm, const double* x, size_t n, double* out) {
  return guarded([&] {
    require(gmm && x && out, "eim_gmm_log_density: null argument");
    const int d = gmm->model.dim();
    const eim::Matrix xs = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        x, static_cast<Eigen::Index>(n), d);
    Eigen::Map<eim::Vector>(out, static_cast<Eigen::Index>(n)) = gmm->model.log_density(xs);
  });
}

eim_status eim_gmm_sample(const eim_gmm* gmm, size_t n, uint64_t seed, double* x, int* labels) {
  return guarded([&] {
    require(gmm && x, "eim_gmm_sample: null argument");
    require(n > 0, "eim_gmm_sample: n must be positive");
    eim::Rng rng(seed);
    const eim::Gmm::Samples s = gmm->model.sample(n, rng);
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(x, s.x.rows(), s.x.cols()) = s.x;
    if (labels) std::copy(s.labels.begin(), s.labels.end(), labels);
  });
}

eim_status eim_gmm_i_projection(const eim_gmm* model, const eim_gmm* target, size_t n, uint64_t seed, double* value,
                                double* stderr_out) {
  return guarded([&] {
    require(model && target && value, "eim_gmm_i_projection: null argument");
    const eim::McEstimate est = eim::mc_i_projection(model->model, target->model, n, seed);
    *value = est.value;
    if (stderr_out) *stderr_out = est.stderr_;
  });
}

eim_status eim_kl_gaussian(int dim, const double* mean_a, const double* cov_a, const double* mean_b,
                           const double* cov_b, double* out) {
  return guarded([&] {
    require(mean_a && cov_a && mean_b && cov_b && out, "eim_kl_gaussian: null argument");
    require(dim > 0, "eim_kl_gaussian: dim must be positive");
    using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    const eim::Gaussian a(Eigen::Map<const eim::Vector>(mean_a, dim), Eigen::Map<const RowMat>(cov_a, dim, dim));
    const eim::Gaussian b(Eigen::Map<const eim::Vector>(mean_b, dim), Eigen::Map<const RowMat>(cov_b, dim, dim));
    *out = eim::kl_gaussian(a, b);
  });
}

eim_status eim_kl_categorical(size_t k, const double* a, const double* b, double* out) {
  return guarded([&] {
    require(a && b && out && k > 0, "eim_kl_categorical: invalid argument");
    const auto n = static_cast<Eigen::Index>(k);
    *out = eim::kl_categorical(eim::Categorical(Eigen::Map<const eim::Vector>(a, n)),
                               eim::Categorical(Eigen::Map<const eim::Vector>(b, n)));
  });
}

}  // extern "C"
