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

// Acceptance suite: one pass/fail line per criterion.
//
//   acceptance [--criterion N]... [--workdir DIR]
//
// Without --criterion every criterion runs. The exit code is 0 only when all
// selected criteria pass.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "core/config.hpp"
#include "core/eim_gmm.hpp"
#include "core/em.hpp"
#include "core/more.hpp"
#include "core/ratio_estimator.hpp"
#include "core/runner.hpp"
#include "support/more_oracles.hpp"
#include "support/oracles.hpp"

using namespace eim;
using namespace eim::testing;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string join(const std::vector<double>& v, const char* f = "%.3g") {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? " " : "") + fmt(f, v[i]);
  return out;
}

fs::path g_workdir;

// --- experiment plumbing through the runner ---------------------------------

struct TrustRegionAudit {
  std::size_t updates = 0;
  double worst_ratio = 0.0;  // max KL / epsilon over accepted updates
  void add(double kl, double eps) {
    ++updates;
    worst_ratio = std::max(worst_ratio, kl / eps);
  }
  bool ok() const { return worst_ratio <= 1.001; }
};

TrustRegionAudit g_audit;

void audit_trace(const fs::path& trace, double eps_component, double eps_coefficient) {
  std::ifstream in(trace);
  std::string line;
  std::getline(in, line);
  std::map<std::pair<std::string, std::string>, double> kl, accepted;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string it, metric, index, value;
    std::getline(ss, it, ',');
    std::getline(ss, metric, ',');
    std::getline(ss, index, ',');
    std::getline(ss, value, ',');
    if (metric == "component_kl") kl[{it, index}] = std::stod(value);
    if (metric == "component_accepted") accepted[{it, index}] = std::stod(value);
    if (metric == "coefficient_kl") g_audit.add(std::stod(value), eps_coefficient);
  }
  for (const auto& [key, v] : kl) {
    if (accepted[key] > 0.5) g_audit.add(v, eps_component);
  }
}

std::string task_dir(const Config& task_cfg, const std::string& name) {
  const fs::path dir = g_workdir / "tasks" / name;
  if (!fs::exists(dir / "meta.json")) cmd_gen_data(task_cfg, dir.string());
  return dir.string();
}

double fit_metric(Config cfg, const std::string& task, const std::string& run_name, const std::string& metric) {
  const fs::path out = g_workdir / "runs" / run_name;
  fs::remove_all(out);
  const auto rows = cmd_fit(cfg, task, out.string());
  const std::string method = cfg.get("run.method");
  if (method.rfind("eim", 0) == 0 && method.find("joint") == std::string::npos && method != "eim-cond") {
    audit_trace(out / "trace.csv", cfg.get_double("eim.epsilon"), cfg.get_double("eim.coefficient_epsilon"));
  }
  for (const auto& r : rows) {
    if (r.metric == metric) return r.value;
  }
  throw std::runtime_error("metric " + metric + " missing for " + run_name);
}

// --- criteria ---------------------------------------------------------------

Matrix normal_samples(int n, double mean, double sd, std::uint64_t seed) {
  Rng rng(seed);
  Matrix x(n, 1);
  for (int i = 0; i < n; ++i) x(i, 0) = mean + sd * rng.normal();
  return x;
}

Outcome criterion1() {
  Stopwatch sw;
  const Matrix p = normal_samples(10000, 0, 1, 101), q = normal_samples(10000, 1, 1, 102);
  const auto fit = train_ratio(p, q, TrainConfig{}, std::nullopt, 103);
  double s = 0;
  const int m = 501;
  for (int i = 0; i < m; ++i) {
    const double x = -2.0 + 5.0 * i / (m - 1);
    const double d = fit.estimator.log_ratio(v1(x)) - (x - 0.5);
    s += d * d;
  }
  const double rmse = std::sqrt(s / m), t = sw.seconds();
  return {rmse <= 0.1 && t <= 30, "rmse " + fmt("%.4f", rmse) + " (<= 0.1), " + fmt("%.1f", t) + " s (<= 30 s)"};
}

Outcome criterion2() {
  Stopwatch sw;
  Rng rng(201);
  double worst_cat = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int k = 2 + trial % 2;
    Vector old(k), phi(k);
    for (int i = 0; i < k; ++i) {
      old[i] = 0.05 + rng.uniform();
      phi[i] = 3.0 * rng.normal();
    }
    old /= old.sum();
    TrustRegionConfig tr;
    tr.epsilon = std::pow(10.0, -3.0 + 3.0 * rng.uniform());
    const auto upd = categorical_more_update(Categorical(old), phi, tr);
    const Vector oracle = brute_force_categorical(old, phi, tr.epsilon);
    worst_cat = std::max(worst_cat, (upd.distribution.probabilities() - oracle).cwiseAbs().maxCoeff());
  }
  TrustRegionConfig tr;
  tr.epsilon = 0.05;
  const auto active =
      gaussian_more_update(Gaussian(v1(0.0), Matrix::Identity(1, 1)), QuadraticSurrogate(Matrix::Zero(1, 1), v1(-10.0), 0.0), tr);
  const double mean_err = std::abs(active.distribution.mean()[0] - std::sqrt(2 * 0.05));

  // A short experiment run so the audit is never empty; criteria 5 and 6
  // audit their own runs as well.
  for (const char* method : {"eim", "eim-no-kl"}) {
    Config c;
    c.set("run.method", method);
    c.set("eim.iterations", "20");
    fit_metric(c, task_dir(c, "c2_gmm"), std::string("c2_") + method, "i_projection");
  }
  const bool ok = worst_cat <= 1e-3 && mean_err <= 1e-4 && g_audit.ok() && sw.seconds() <= 60;
  return {ok, "categorical max dev " + fmt("%.2e", worst_cat) + " (<= 1e-3), active mean err " + fmt("%.2e", mean_err) +
                  " (<= 1e-4), trust region max KL/eps " + fmt("%.5f", g_audit.worst_ratio) + " over " +
                  std::to_string(g_audit.updates) + " updates (<= 1.001), " + fmt("%.1f", sw.seconds()) + " s (<= 60 s)"};
}

double kl_quad(const Gmm& q, const Gmm& p) {
  return integrate([&](double x) {
    const double lq = q.log_density(v1(x));
    return std::exp(lq) * (lq - p.log_density(v1(x)));
  }, -40, 40, 1e-13);
}

double bound_quad(const Gmm& q, const Gmm& q_old, const Gmm& p) {
  return integrate([&](double x) {
    const Matrix xs = Matrix::Constant(1, 1, x);
    return upper_bound_integrand(q, q_old, xs, p.log_density(xs))[0];
  }, -40, 40, 1e-13);
}

Outcome criterion3() {
  Rng rng(301);
  auto random_gmm_1d = [&](int k) {
    std::vector<double> w, m, v;
    for (int i = 0; i < k; ++i) {
      w.push_back(0.2 + rng.uniform());
      m.push_back(4.0 * rng.normal());
      v.push_back(0.3 + 2.0 * rng.uniform());
    }
    double s = 0;
    for (double x : w) s += x;
    for (double& x : w) x /= s;
    return gmm_1d(w, m, v);
  };
  double worst_gap = INFINITY, worst_tight = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const Gmm p = random_gmm_1d(3), q_old = random_gmm_1d(2), q = random_gmm_1d(2);
    worst_gap = std::min(worst_gap, bound_quad(q, q_old, p) - kl_quad(q, p));
    worst_tight = std::max(worst_tight, std::abs(bound_quad(q_old, q_old, p) - kl_quad(q_old, p)));
  }
  return {worst_gap >= -1e-6 && worst_tight <= 1e-6,
          "min U - KL " + fmt("%.3e", worst_gap) + " (>= -1e-6), max |U - KL| at q_old " + fmt("%.3e", worst_tight) +
              " (<= 1e-6)"};
}

Outcome criterion4() {
  Stopwatch sw;
  const Gmm target = gmm_1d({0.5, 0.5}, {-5, 5}, {1, 1});
  int eim_ok = 0, em_ok = 0;
  std::vector<double> eim_means, em_means;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed, 1);
    const Matrix data = target.sample(10000, rng).x;
    const Gmm init = init_gmm_from_data(data, 1, seed);
    EimGmmConfig cfg;
    cfg.iterations = 60;
    cfg.seed = seed;
    const double m_eim = run_eim_gmm(data, init, cfg).model.component(0).mean()[0];
    EmConfig em;
    em.seed = seed;
    const double m_em = run_em_gmm(data, init, em).model.component(0).mean()[0];
    eim_means.push_back(m_eim);
    em_means.push_back(m_em);
    eim_ok += std::abs(std::abs(m_eim) - 5.0) <= 0.5;
    em_ok += std::abs(m_em) <= 0.5;
  }
  const double t = sw.seconds();
  return {eim_ok >= 9 && em_ok >= 9 && t <= 300,
          "EIM at a mode " + std::to_string(eim_ok) + "/10 (>= 9) [" + join(eim_means) + "], EM at 0 " +
              std::to_string(em_ok) + "/10 (>= 9), " + fmt("%.0f", t) + " s (<= 300 s)"};
}

Outcome criterion5() {
  Stopwatch sw;
  std::map<int, std::vector<double>> eim;
  std::vector<double> fgan, joint;
  int fgan_wins = 0, joint_wins = 0;
  for (int dim : {2, 6, 10}) {
    for (int seed = 0; seed < 5; ++seed) {
      Config c;
      c.set("task.dim", std::to_string(dim));
      c.set("task.components", "5");
      c.set("run.components", "5");
      c.set("run.seed", std::to_string(seed));
      c.set("eim.iterations", "200");
      const std::string tag = std::to_string(dim) + "_" + std::to_string(seed);
      const std::string task = task_dir(c, "gmm_" + tag);
      const double e = fit_metric(c, task, "c5_eim_" + tag, "i_projection");
      eim[dim].push_back(e);
      if (dim == 10) {
        c.set("run.method", "fgan");
        const double f = fit_metric(c, task, "c5_fgan_" + tag, "i_projection");
        fgan.push_back(f);
        fgan_wins += e < f;
      }
      if (dim == 2) {
        c.set("run.method", "eim-joint-no-kl");
        const double j = fit_metric(c, task, "c5_joint_no_kl_" + tag, "i_projection");
        joint.push_back(j);
        joint_wins += e <= j;
      }
    }
  }
  const double m2 = median(eim[2]), m10 = median(eim[10]), t = sw.seconds();
  const bool ok = m2 <= 0.05 && m10 <= 0.3 && fgan_wins >= 4 && joint_wins >= 4 && g_audit.ok() && t <= 7200;
  return {ok, "median EIM dim2 " + fmt("%.4f", m2) + " (<= 0.05) dim6 " + fmt("%.4f", median(eim[6])) + " dim10 " +
                  fmt("%.4f", m10) + " (<= 0.3); EIM < f-GAN at dim10 " + std::to_string(fgan_wins) +
                  "/5 (>= 4) [EIM " + join(eim[10]) + " | f-GAN " + join(fgan) + "]; EIM <= joint-no-KL at dim2 " +
                  std::to_string(joint_wins) + "/5 (>= 4) [EIM " + join(eim[2]) + " | joint " + join(joint) +
                  "]; trust region max KL/eps " + fmt("%.5f", g_audit.worst_ratio) + "; " + fmt("%.0f", t) +
                  " s (<= 7200 s)"};
}

Config robot_config() {
  Config c = Config::from_file(std::string(EIM_CONFIG_DIR) + "/robot_line.ini");
  return c;
}

Outcome criterion6() {
  Stopwatch sw;
  int ok_seeds = 0, eim_ok = 0, em_ok = 0, feat_ok = 0;
  std::vector<double> eim, feat, em;
  for (int seed = 0; seed < 5; ++seed) {
    Config c = robot_config();
    c.set("run.seed", std::to_string(seed));
    const std::string tag = std::to_string(seed);
    const std::string task = task_dir(c, "robot_" + tag);
    c.set("run.method", "eim");
    c.set("eim.features", "false");
    const double e = fit_metric(c, task, "c6_eim_" + tag, "line_rmse");
    c.set("eim.features", "true");
    const double f = fit_metric(c, task, "c6_eim_features_" + tag, "line_rmse");
    c.set("run.method", "em");
    const double m = fit_metric(c, task, "c6_em_" + tag, "line_rmse");
    eim.push_back(e);
    feat.push_back(f);
    em.push_back(m);
    eim_ok += e <= 0.5;
    em_ok += m >= 2 * e;
    feat_ok += f <= e;
    ok_seeds += e <= 0.5 && m >= 2 * e && f <= e;
  }
  const double t = sw.seconds();
  return {ok_seeds >= 4 && g_audit.ok() && t <= 3600,
          "seeds meeting all conditions " + std::to_string(ok_seeds) + "/5 (>= 4): EIM <= 0.5 " + std::to_string(eim_ok) +
              "/5, EM >= 2x EIM " + std::to_string(em_ok) + "/5, features <= plain " + std::to_string(feat_ok) +
              "/5 [EIM " + join(eim) + " | features " + join(feat) + " | EM " + join(em) + "]; trust region max KL/eps " +
              fmt("%.5f", g_audit.worst_ratio) + "; " + fmt("%.0f", t) + " s (<= 3600 s)"};
}

Outcome criterion7() {
  Stopwatch sw;
  int ok = 0;
  std::vector<double> eim, ml;
  for (int seed = 0; seed < 5; ++seed) {
    Config c = Config::from_file(std::string(EIM_CONFIG_DIR) + "/obstacle.ini");
    c.set("run.seed", std::to_string(seed));
    const std::string tag = std::to_string(seed);
    const std::string task = task_dir(c, "obstacle_" + tag);
    c.set("run.method", "eim-cond");
    const double e = fit_metric(c, task, "c7_eim_" + tag, "success_rate");
    c.set("run.method", "ml-cond");
    const double m = fit_metric(c, task, "c7_ml_" + tag, "success_rate");
    eim.push_back(e);
    ml.push_back(m);
    ok += e >= 0.75 && e >= m + 0.1;
  }
  const double t = sw.seconds();
  return {ok >= 4 && t <= 3600, "seeds with EIM >= 0.75 and >= ML + 0.1: " + std::to_string(ok) + "/5 (>= 4) [EIM " +
                                    join(eim) + " | ML " + join(ml) + "]; " + fmt("%.0f", t) + " s (<= 3600 s)"};
}

Outcome criterion8() {
  Stopwatch sw;
  const std::string cmd = std::string(EIM_UNIT_TESTS) + " > " + (g_workdir / "unit_tests.log").string() + " 2>&1";
  const int rc = std::system(cmd.c_str());
  const double t = sw.seconds();
  return {rc == 0 && t <= 300, std::string("property and unit suites ") + (rc == 0 ? "passed" : "failed (see unit_tests.log)") +
                                   ", " + fmt("%.0f", t) + " s (<= 300 s)"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::vector<int> selected;
  std::string workdir = (fs::temp_directory_path() / "eim_acceptance").string();
  app.add_option("--criterion", selected, "criterion number (repeatable)")->check(CLI::Range(1, 8));
  app.add_option("--workdir", workdir, "scratch directory for tasks and runs");
  CLI11_PARSE(app, argc, argv);
  if (selected.empty()) selected = {1, 2, 3, 4, 5, 6, 7, 8};
  g_workdir = workdir;
  fs::create_directories(g_workdir);

  const std::map<int, std::pair<std::string, std::function<Outcome()>>> criteria = {
      {1, {"ratio estimator fidelity", criterion1}},
      {2, {"trust-region update correctness", criterion2}},
      {3, {"upper bound on the I-projection", criterion3}},
      {4, {"mode seeking vs moment matching", criterion4}},
      {5, {"random GMM sweep", criterion5}},
      {6, {"robot line reaching", criterion6}},
      {7, {"obstacle avoidance", criterion7}},
      {8, {"property suites", criterion8}},
  };
  bool all = true;
  for (int n : selected) {
    const auto& [name, fn] = criteria.at(n);
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    all = all && o.pass;
    const std::string line = "criterion " + std::to_string(n) + " (" + name + "): " + (o.pass ? "PASS" : "FAIL") + ": " + o.detail;
    std::printf("%s\n", line.c_str());
    std::fflush(stdout);
    // Latest line per criterion, printed by ctest after the run.
    fs::create_directories(g_workdir / "results");
    std::ofstream(g_workdir / "results" / ("criterion_" + std::to_string(n) + ".txt")) << line << "\n";
  }
  return all ? 0 : 1;
}
