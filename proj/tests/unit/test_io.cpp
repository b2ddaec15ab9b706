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

#include <doctest.h>

#include <filesystem>

#include "core/config.hpp"
#include "core/csv.hpp"
#include "core/errors.hpp"
#include "core/moe.hpp"
#include "core/ratio_estimator.hpp"
#include "core/serialization.hpp"
#include "support/oracles.hpp"

using namespace eim;
using namespace eim::testing;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("eim_unit_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("config defaults, sections and errors") {
  Config c;
  CHECK(c.get_double("eim.epsilon") == 0.05);
  CHECK(c.get_int("eim.samples_per_component") == 1000);
  c.merge_text("[eim]\niterations = 7 # comment\n\n[ratio]\nhidden = 8,4\nrun.seed=3\n");
  CHECK(c.get_int("eim.iterations") == 7);
  CHECK(c.get_ints("ratio.hidden") == std::vector<int>{8, 4});
  CHECK(c.get_u64("run.seed") == 3);
  CHECK_THROWS_AS(c.set("eim.no_such_key", "1"), ConfigError);
  try {
    c.merge_text("[eim]\nbogus = 1\n", "file.ini");
    FAIL("expected a config error");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("file.ini:2") != std::string::npos);
    CHECK(msg.find("eim.epsilon") != std::string::npos);
  }
  c.set("eim.iterations", "seven");
  CHECK_THROWS_AS(c.get_int("eim.iterations"), ConfigError);
  c.set("eim.update_coefficients", "maybe");
  CHECK_THROWS_AS(c.get_bool("eim.update_coefficients"), ConfigError);
  CHECK_THROWS_AS(Config::from_file("/nonexistent/eim.ini"), IoError);
}

TEST_CASE("config snapshot round trip") {
  Config c;
  c.set("eim.iterations", "17");
  c.set("ratio.hidden", "3,2");
  c.set("task.name", "robot_line");
  const Config back = Config::from_text(c.snapshot());
  CHECK(back.values() == c.values());
  CHECK(back.hash() == c.hash());
  CHECK(c.hash().size() == 16);
  Config d = c;
  d.set("eim.iterations", "18");
  CHECK(d.hash() != c.hash());
}

TEST_CASE("matrix CSV round trip is exact") {
  const fs::path dir = scratch_dir("csv");
  Rng rng(1);
  Matrix m(17, 3);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal() * std::pow(10.0, rng.normal() * 5);
  m(0, 0) = 0.1;
  m(1, 1) = -0.0;
  const std::string path = (dir / "m.csv").string();
  write_matrix_csv(path, m);
  CHECK(read_matrix_csv(path) == m);
  CHECK_THROWS_AS(read_matrix_csv((dir / "missing.csv").string()), IoError);
  write_text_file((dir / "bad.csv").string(), "x0,x1\n1,2\n3\n");
  CHECK_THROWS(read_matrix_csv((dir / "bad.csv").string()));
}

TEST_CASE("model serialization round trips bit for bit") {
  Rng rng(2);
  std::vector<Gaussian> cs;
  for (int k = 0; k < 3; ++k) {
    Vector mu(2);
    mu << rng.normal(), rng.normal();
    cs.emplace_back(mu, random_spd(2, rng));
  }
  Vector w(3);
  w << 0.2, 0.3, 0.5;
  const Gmm g(cs, Categorical(w));
  const Json doc = to_json(g);
  CHECK(document_type(doc) == "gmm");
  const Gmm back = gmm_from_json(Json::parse(dump(doc)));
  CHECK(dump(to_json(back)) == dump(doc));
  for (int k = 0; k < 3; ++k) {
    CHECK(back.component(k).mean() == g.component(k).mean());
    CHECK(back.component(k).cholesky() == g.component(k).cholesky());
    CHECK((back.component(k).covariance() - g.component(k).covariance()).cwiseAbs().maxCoeff() <= 1e-15);
  }
  CHECK(back.weights().probabilities() == g.weights().probabilities());

  MixtureOfExperts m(2, 1, 2, {4}, Activation::kTanh);
  m.gating().init(rng);
  m.expert(0).init(rng);
  m.expert(1).init(rng);
  const MixtureOfExperts mb = moe_from_json(Json::parse(dump(to_json(m))));
  const Matrix ctx = Matrix::Random(5, 2), xs = Matrix::Random(5, 1);
  CHECK(mb.log_density(ctx, xs) == m.log_density(ctx, xs));

  TrainConfig tc;
  tc.hidden = {6};
  const RatioEstimator r(1, 0, tc, std::nullopt, rng);
  const RatioEstimator rb = ratio_from_json(Json::parse(dump(to_json(r))));
  CHECK(rb.log_ratio(v1(0.7)) == r.log_ratio(v1(0.7)));

  CHECK_THROWS(gmm_from_json(to_json(m)));
  CHECK_THROWS(gmm_from_json(Json::parse("{\"type\":\"gmm\",\"version\":999}")));
}
