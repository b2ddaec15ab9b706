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

#include <CLI11.hpp>

#include <cstdio>
#include <string>
#include <vector>

#include "eim/eim.h"

namespace {

int exit_code(eim_status s) {
  switch (s) {
    case EIM_OK: return 0;
    case EIM_ERR_CONFIG: return 2;
    case EIM_ERR_NUMERICAL: return 3;
    default: return 1;
  }
}

int report(eim_status s) {
  if (s != EIM_OK) std::fprintf(stderr, "eimctl: %s\n", eim_last_error());
  return exit_code(s);
}

struct ConfigHandle {
  eim_config* cfg = nullptr;
  ConfigHandle() { eim_config_create(&cfg); }
  ~ConfigHandle() { eim_config_free(cfg); }
  ConfigHandle(const ConfigHandle&) = delete;
  ConfigHandle& operator=(const ConfigHandle&) = delete;
};

// Applies --config, then the flag overrides, then --set key=value pairs.
eim_status build_config(ConfigHandle& h, const std::string& file,
                        const std::vector<std::pair<std::string, std::string>>& flags,
                        const std::vector<std::string>& sets) {
  if (!h.cfg) return EIM_ERR_INTERNAL;
  if (!file.empty()) {
    if (eim_status s = eim_config_load(h.cfg, file.c_str()); s != EIM_OK) return s;
  }
  for (const auto& [k, v] : flags) {
    if (v.empty()) continue;
    if (eim_status s = eim_config_set(h.cfg, k.c_str(), v.c_str()); s != EIM_OK) return s;
  }
  for (const std::string& kv : sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      std::fprintf(stderr, "eimctl: --set expects key=value, got '%s'\n", kv.c_str());
      return EIM_ERR_CONFIG;
    }
    const std::string key = kv.substr(0, eq), value = kv.substr(eq + 1);
    if (eim_status s = eim_config_set(h.cfg, key.c_str(), value.c_str()); s != EIM_OK) return s;
  }
  return EIM_OK;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Expected information maximization experiments"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(eim_version()));

  std::string config_file, out, task_name, task_dir, method, model, metrics;
  std::string seed, dim, components;
  std::vector<std::string> sets;
  std::size_t n = 10000;
  std::uint64_t eval_seed = 0;
  std::string jobs;

  auto* gen = app.add_subcommand("gen-data", "Generate a task dataset");
  gen->add_option("--task", task_name, "random_gmm, robot_line or obstacle");
  gen->add_option("--dim", dim, "dimension (random_gmm)");
  gen->add_option("--components", components, "target components (random_gmm)");
  gen->add_option("--seed", seed, "seed");
  gen->add_option("--config", config_file, "config file");
  gen->add_option("--set", sets, "key=value override (repeatable)");
  gen->add_option("--out", out, "output directory")->required();

  auto* fit = app.add_subcommand("fit", "Fit a model to a task dataset");
  fit->add_option("--method", method, "eim, eim-no-kl, eim-joint, eim-joint-no-kl, em, fgan, eim-cond, ml-cond");
  fit->add_option("--task", task_dir, "task directory")->required();
  fit->add_option("--components", components, "mixture components");
  fit->add_option("--seed", seed, "seed");
  fit->add_option("--config", config_file, "config file");
  fit->add_option("--set", sets, "key=value override (repeatable)");
  fit->add_option("--out", out, "run directory")->required();

  auto* ev = app.add_subcommand("eval", "Evaluate a saved model");
  ev->add_option("--model", model, "model file")->required();
  ev->add_option("--task", task_dir, "task directory")->required();
  ev->add_option("--metrics", metrics, "comma separated metrics (default: task metrics)");
  ev->add_option("--n", n, "model samples per metric");
  ev->add_option("--seed", eval_seed, "evaluation seed");
  ev->add_option("--out", out, "metrics CSV to append to");

  auto* sweep = app.add_subcommand("sweep", "Run a dims x seeds x methods grid");
  sweep->add_option("--config", config_file, "config file");
  sweep->add_option("--set", sets, "key=value override (repeatable)");
  sweep->add_option("--jobs", jobs, "concurrent runs");
  sweep->add_option("--out", out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  ConfigHandle h;
  if (*gen) {
    eim_status s = build_config(h, config_file,
                                {{"task.name", task_name}, {"task.dim", dim}, {"task.components", components},
                                 {"run.seed", seed}},
                                sets);
    if (s == EIM_OK) s = eim_gen_data(h.cfg, out.c_str());
    return report(s);
  }
  if (*fit) {
    eim_status s = build_config(h, config_file,
                                {{"run.method", method}, {"run.components", components}, {"run.seed", seed}}, sets);
    if (s == EIM_OK) s = eim_fit(h.cfg, task_dir.c_str(), out.c_str());
    return report(s);
  }
  if (*ev) {
    size_t needed = 0;
    std::string text(1 << 16, '\0');
    eim_status s = eim_eval(model.c_str(), task_dir.c_str(), metrics.c_str(), n, eval_seed,
                            out.empty() ? nullptr : out.c_str(), text.data(), text.size(), &needed);
    if (s != EIM_OK) return report(s);
    std::fputs(text.c_str(), stdout);
    return 0;
  }
  if (*sweep) {
    eim_status s = build_config(h, config_file, {{"sweep.jobs", jobs}}, sets);
    size_t rows = 0;
    if (s == EIM_OK) s = eim_sweep(h.cfg, out.c_str(), &rows);
    if (s == EIM_OK) std::printf("%zu runs written to %s/sweep.csv\n", rows, out.c_str());
    return report(s);
  }
  return 1;
}
