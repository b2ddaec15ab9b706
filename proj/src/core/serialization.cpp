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

#include "core/serialization.hpp"

#include <fstream>
#include <sstream>

#include "core/errors.hpp"

namespace eim {
namespace {

Json vec_json(const Eigen::Ref<const Vector>& v) { return Json(std::vector<double>(v.data(), v.data() + v.size())); }

Vector json_vec(const Json& j, const char* what) {
  if (!j.is_array()) throw InputError(std::string("model document: '") + what + "' must be an array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  return v;
}

Json mat_json(const Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back(vec_json(m.row(i).transpose()));
  return rows;
}

Matrix json_mat(const Json& j, const char* what) {
  if (!j.is_array() || j.empty()) throw InputError(std::string("model document: '") + what + "' must be a non-empty array");
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  Matrix m(static_cast<Eigen::Index>(j.size()), cols);
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (static_cast<Eigen::Index>(j[i].size()) != cols) throw InputError(std::string("model document: ragged '") + what + "'");
    m.row(static_cast<Eigen::Index>(i)) = json_vec(j[i], what).transpose();
  }
  return m;
}

Json mlp_json(const Mlp& net) {
  return Json{{"layer_sizes", net.layer_sizes()}, {"activation", to_string(net.activation())},
              {"params", vec_json(net.params())}};
}

Mlp json_mlp(const Json& j) {
  Mlp net(j.at("layer_sizes").get<std::vector<int>>(), activation_from_string(j.at("activation").get<std::string>()));
  const Vector p = json_vec(j.at("params"), "params");
  if (p.size() != net.params().size()) throw InputError("model document: network parameter count mismatch");
  net.params() = p;
  return net;
}

void check_header(const Json& doc, const std::string& type) {
  if (!doc.is_object()) throw InputError("model document: not an object");
  if (!doc.contains("version") || doc["version"].get<int>() != kFormatVersion) {
    throw InputError("model document: unsupported or missing version");
  }
  if (document_type(doc) != type) throw InputError("model document: expected type '" + type + "'");
}

}  // namespace

std::string document_type(const Json& doc) {
  if (!doc.is_object() || !doc.contains("type") || !doc["type"].is_string()) throw InputError("model document: missing type");
  return doc["type"].get<std::string>();
}

Json to_json(const Gmm& model) {
  Json means = Json::array(), chols = Json::array();
  for (const Gaussian& g : model.components()) {
    means.push_back(vec_json(g.mean()));
    chols.push_back(mat_json(g.cholesky()));
  }
  return Json{{"version", kFormatVersion},
              {"type", "gmm"},
              {"dim", model.dim()},
              {"weights", vec_json(model.weights().probabilities())},
              {"means", means},
              {"cholesky_factors", chols}};
}

Gmm gmm_from_json(const Json& doc) {
  try {
    check_header(doc, "gmm");
    const int d = doc.at("dim").get<int>();
    const Json& means = doc.at("means");
    const Json& chols = doc.at("cholesky_factors");
    const Vector w = json_vec(doc.at("weights"), "weights");
    if (means.size() != chols.size() || static_cast<Eigen::Index>(means.size()) != w.size() || means.empty()) {
      throw InputError("model document: component counts disagree");
    }
    std::vector<Gaussian> comps;
    for (std::size_t k = 0; k < means.size(); ++k) {
      Vector mu = json_vec(means[k], "means");
      Matrix l = json_mat(chols[k], "cholesky_factors");
      if (mu.size() != d || l.rows() != d || l.cols() != d) throw InputError("model document: component shape mismatch");
      comps.push_back(Gaussian::from_cholesky(std::move(mu), std::move(l)));
    }
    return Gmm(std::move(comps), Categorical(w));
  } catch (const Json::exception& e) {
    throw InputError(std::string("model document: ") + e.what());
  }
}

Json to_json(const MixtureOfExperts& model) {
  Json experts = Json::array();
  for (int k = 0; k < model.num_components(); ++k) experts.push_back(mlp_json(model.expert(k)));
  return Json{{"version", kFormatVersion}, {"type", "moe"},   {"dim", model.dim()}, {"context_dim", model.context_dim()},
              {"gating", mlp_json(model.gating())}, {"experts", experts}};
}

MixtureOfExperts moe_from_json(const Json& doc) {
  try {
    check_header(doc, "moe");
    std::vector<Mlp> experts;
    for (const Json& e : doc.at("experts")) experts.push_back(json_mlp(e));
    return MixtureOfExperts(json_mlp(doc.at("gating")), std::move(experts), doc.at("context_dim").get<int>(),
                            doc.at("dim").get<int>());
  } catch (const Json::exception& e) {
    throw InputError(std::string("model document: ") + e.what());
  }
}

Json to_json(const RatioEstimator& est) {
  return Json{{"version", kFormatVersion},
              {"type", "ratio_estimator"},
              {"x_width", est.x_width()},
              {"context_width", est.context_width()},
              {"features", est.features() ? Json(est.features()->name) : Json(nullptr)},
              {"feature_width", est.feature_width()},
              {"input_shift", vec_json(est.input_shift())},
              {"input_scale", vec_json(est.input_scale())},
              {"network", mlp_json(est.net())}};
}

RatioEstimator ratio_from_json(const Json& doc, std::optional<FeatureMap> features) {
  try {
    check_header(doc, "ratio_estimator");
    const Json& f = doc.at("features");
    if (f.is_null() != !features.has_value() || (features && f.get<std::string>() != features->name)) {
      throw InputError("ratio estimator document: feature map mismatch");
    }
    return RatioEstimator(json_mlp(doc.at("network")), doc.at("x_width").get<int>(), doc.at("context_width").get<int>(),
                          json_vec(doc.at("input_shift"), "input_shift"), json_vec(doc.at("input_scale"), "input_scale"),
                          std::move(features));
  } catch (const Json::exception& e) {
    throw InputError(std::string("model document: ") + e.what());
  }
}

std::string dump(const Json& doc) { return doc.dump(2) + "\n"; }

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw InputError("'" + path + "': " + e.what());
  }
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << text;
  if (!out) throw IoError("write failed for '" + path + "'");
}

}  // namespace eim
