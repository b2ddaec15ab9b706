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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "eim/eim.h"

namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("eim_api_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(EIMCTL_PATH) + " " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

struct Cfg {
  eim_config* h = nullptr;
  Cfg() { REQUIRE(eim_config_create(&h) == EIM_OK); }
  ~Cfg() { eim_config_free(h); }
  void set(const char* k, const char* v) { REQUIRE(eim_config_set(h, k, v) == EIM_OK); }
};

// Small settings shared by the command tests.
void make_fast(Cfg& c) {
  c.set("task.train", "600");
  c.set("task.test", "300");
  c.set("task.validation", "300");
  c.set("eim.samples_per_component", "200");
  c.set("ratio.max_epochs", "5");
  c.set("ratio.hidden", "8");
  c.set("eim.eval_samples", "200");
  c.set("fgan.hidden", "8");
  c.set("fgan.batch_size", "100");
  c.set("fgan.eval_samples", "200");
  c.set("eval.n", "500");
}

}  // namespace

TEST_CASE("version and error reporting") {
  CHECK(std::string(eim_version()).size() > 0);
  eim_config* cfg = nullptr;
  CHECK(eim_config_create(nullptr) == EIM_ERR_INPUT);
  CHECK(std::string(eim_last_error()).size() > 0);
  REQUIRE(eim_config_create(&cfg) == EIM_OK);
  CHECK(std::string(eim_last_error()).empty());
  CHECK(eim_config_set(cfg, "eim.bogus", "1") == EIM_ERR_CONFIG);
  CHECK(std::string(eim_last_error()).find("eim.epsilon") != std::string::npos);
  CHECK(eim_config_load(cfg, "/nonexistent/x.ini") == EIM_ERR_IO);
  eim_config_free(cfg);
  eim_config_free(nullptr);
}

TEST_CASE("config buffer protocol") {
  Cfg c;
  size_t needed = 0;
  char small[2];
  CHECK(eim_config_get(c.h, "eim.epsilon", small, sizeof small, &needed) == EIM_ERR_INPUT);
  CHECK(needed == 5);
  std::vector<char> buf(needed);
  REQUIRE(eim_config_get(c.h, "eim.epsilon", buf.data(), buf.size(), &needed) == EIM_OK);
  CHECK(std::string(buf.data()) == "0.05");
  CHECK(eim_config_get(c.h, "nope", buf.data(), buf.size(), &needed) == EIM_ERR_CONFIG);
  REQUIRE(eim_config_dump(c.h, nullptr, 0, &needed) == EIM_OK);
  std::vector<char> dump(needed);
  REQUIRE(eim_config_dump(c.h, dump.data(), dump.size(), &needed) == EIM_OK);
  CHECK(std::string(dump.data()).find("[eim]") != std::string::npos);
}

TEST_CASE("gmm handles") {
  const double w[2] = {0.25, 0.75};
  const double mu[2] = {-1.0, 2.0};
  const double cov[2] = {1.0, 4.0};
  eim_gmm* g = nullptr;
  REQUIRE(eim_gmm_create(1, 2, w, mu, cov, &g) == EIM_OK);
  CHECK(eim_gmm_dim(g) == 1);
  CHECK(eim_gmm_components(g) == 2);
  const double x[3] = {-1.0, 0.0, 2.5};
  double ld[3];
  REQUIRE(eim_gmm_log_density(g, x, 3, ld) == EIM_OK);
  for (int i = 0; i < 3; ++i) {
    const double p = 0.25 * std::exp(-0.5 * (x[i] + 1) * (x[i] + 1)) / std::sqrt(2 * M_PI) +
                     0.75 * std::exp(-0.5 * (x[i] - 2) * (x[i] - 2) / 4) / std::sqrt(8 * M_PI);
    CHECK(ld[i] == doctest::Approx(std::log(p)).epsilon(1e-12));
  }
  std::vector<double> s1(100), s2(100);
  std::vector<int> labels(100);
  REQUIRE(eim_gmm_sample(g, 100, 5, s1.data(), labels.data()) == EIM_OK);
  REQUIRE(eim_gmm_sample(g, 100, 5, s2.data(), nullptr) == EIM_OK);
  CHECK(s1 == s2);
  double v = 0, se = 0;
  REQUIRE(eim_gmm_i_projection(g, g, 5000, 1, &v, &se) == EIM_OK);
  CHECK(std::abs(v) <= 3 * se + 1e-12);

  const fs::path dir = scratch_dir("gmm");
  REQUIRE(eim_gmm_save(g, (dir / "g.json").c_str()) == EIM_OK);
  eim_gmm* h = nullptr;
  REQUIRE(eim_gmm_load((dir / "g.json").c_str(), &h) == EIM_OK);
  REQUIRE(eim_gmm_save(h, (dir / "h.json").c_str()) == EIM_OK);
  CHECK(slurp(dir / "g.json") == slurp(dir / "h.json"));
  eim_gmm_free(h);
  CHECK(eim_gmm_load((dir / "missing.json").c_str(), &h) == EIM_ERR_IO);

  const double bad_w[2] = {0.5, 0.2};
  eim_gmm* bad = nullptr;
  CHECK(eim_gmm_create(1, 2, bad_w, mu, cov, &bad) != EIM_OK);
  const double neg_cov[2] = {1.0, -1.0};
  CHECK(eim_gmm_create(1, 2, w, mu, neg_cov, &bad) != EIM_OK);
  CHECK(eim_gmm_log_density(nullptr, x, 3, ld) == EIM_ERR_INPUT);
  eim_gmm_free(g);
}

TEST_CASE("closed-form divergences") {
  const double ma[1] = {1.0}, mb[1] = {0.0}, ca[1] = {1.0}, cb[1] = {1.0};
  double out = 0;
  REQUIRE(eim_kl_gaussian(1, ma, ca, mb, cb, &out) == EIM_OK);
  CHECK(out == doctest::Approx(0.5).epsilon(1e-12));
  const double a[2] = {0.9, 0.1}, b[2] = {0.5, 0.5};
  REQUIRE(eim_kl_categorical(2, a, b, &out) == EIM_OK);
  CHECK(out == doctest::Approx(0.9 * std::log(1.8) + 0.1 * std::log(0.2)).epsilon(1e-12));
}

TEST_CASE("fit with zero iterations returns the initial model byte for byte") {
  const fs::path dir = scratch_dir("fit0");
  Cfg c;
  make_fast(c);
  c.set("run.components", "3");
  c.set("eim.iterations", "0");
  REQUIRE(eim_gen_data(c.h, (dir / "task").c_str()) == EIM_OK);
  for (const char* method : {"eim", "em", "fgan"}) {
    c.set("run.method", method);
    c.set("em.iterations", "0");
    c.set("fgan.iterations", "0");
    const fs::path out = dir / method;
    REQUIRE(eim_fit(c.h, (dir / "task").c_str(), out.c_str()) == EIM_OK);
    CHECK(slurp(out / "model.json") == slurp(out / "init_model.json"));
    for (const char* f : {"config.ini", "seed.txt", "trace.csv", "metrics.csv", "timing.csv"}) {
      CHECK(fs::exists(out / f));
    }
  }
}

TEST_CASE("evaluating the target gives a vanishing I-projection") {
  const fs::path dir = scratch_dir("eval");
  Cfg c;
  make_fast(c);
  REQUIRE(eim_gen_data(c.h, (dir / "task").c_str()) == EIM_OK);
  size_t needed = 0;
  std::vector<char> buf(65536);
  REQUIRE(eim_eval((dir / "task" / "target.json").c_str(), (dir / "task").c_str(), "i_projection", 20000, 3,
                   (dir / "m.csv").c_str(), buf.data(), buf.size(), &needed) == EIM_OK);
  std::istringstream in(buf.data());
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  // method,task,seed,metric,value,stderr,...
  std::vector<std::string> f;
  std::stringstream rs(row);
  for (std::string item; std::getline(rs, item, ',');) f.push_back(item);
  REQUIRE(f.size() >= 6);
  CHECK(f[3] == "i_projection");
  CHECK(std::abs(std::stod(f[4])) <= 3 * std::stod(f[5]) + 1e-12);
  CHECK(eim_eval((dir / "nope.json").c_str(), (dir / "task").c_str(), "", 10, 1, "", nullptr, 0, &needed) ==
        EIM_ERR_IO);
}

TEST_CASE("sweep writes one row per run") {
  const fs::path dir = scratch_dir("sweep");
  Cfg c;
  make_fast(c);
  c.set("eim.iterations", "1");
  c.set("fgan.iterations", "2");
  c.set("sweep.dims", "2,6,10");
  c.set("sweep.seeds", "0,1,2,3,4");
  c.set("sweep.methods", "eim,fgan");
  size_t rows = 0;
  REQUIRE(eim_sweep(c.h, dir.c_str(), &rows) == EIM_OK);
  CHECK(rows == 30);
  std::ifstream in(dir / "sweep.csv");
  std::string line;
  int n = 0;
  while (std::getline(in, line)) ++n;
  CHECK(n == 31);
}

TEST_CASE("command line front end") {
  const fs::path dir = scratch_dir("cli");
  const std::string fast = " --set task.train=600 --set task.test=300 --set task.validation=300"
                           " --set eim.samples_per_component=200 --set ratio.max_epochs=5 --set ratio.hidden=8"
                           " --set eim.iterations=2 --set eim.eval_samples=200";
  const std::string task = (dir / "task").string();
  REQUIRE(run_cli("gen-data --task random_gmm --dim 2 --components 2 --seed 1 --out " + task + fast) == 0);
  const std::string snapshot_before = slurp(dir / "task" / "train.csv");
  REQUIRE(run_cli("fit --method eim --task " + task + " --components 2 --seed 4 --out " + (dir / "a").string() + fast) == 0);
  CHECK(slurp(dir / "task" / "train.csv") == snapshot_before);
  // Re-feeding the resolved snapshot reproduces the run.
  REQUIRE(run_cli("fit --config " + (dir / "a" / "config.ini").string() + " --task " + task + " --out " +
                  (dir / "b").string()) == 0);
  CHECK(slurp(dir / "a" / "model.json") == slurp(dir / "b" / "model.json"));
  CHECK(slurp(dir / "a" / "trace.csv") == slurp(dir / "b" / "trace.csv"));
  REQUIRE(run_cli("eval --model " + (dir / "a" / "model.json").string() + " --task " + task + " --n 500 --seed 1 --out " +
                  (dir / "eval.csv").string()) == 0);
  CHECK(fs::exists(dir / "eval.csv"));

  CHECK(run_cli("fit --task " + task + " --set eim.bogus=1 --out " + (dir / "c").string()) == 2);
  CHECK(run_cli("eval --model " + (dir / "missing.json").string() + " --task " + task) != 0);
  CHECK(run_cli("fit --no-such-flag") == 2);
  CHECK(run_cli("--help") == 0);
  // Numerical failure: a ratio learning rate that overflows the loss.
  CHECK(run_cli("fit --method eim --task " + task + " --set ratio.learning_rate=1e300 --out " + (dir / "d").string() + fast) == 3);
}
