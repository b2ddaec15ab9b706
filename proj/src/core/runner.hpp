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

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/config.hpp"
#include "core/tasks.hpp"

namespace eim {

struct MetricRow {
  std::string method;
  std::string task;
  std::uint64_t seed = 0;
  std::string metric;
  double value = 0.0;
  double stderr_ = 0.0;
  std::size_t n = 0;
  std::string config_hash;
};

void write_metrics_csv(const std::string& path, const std::vector<MetricRow>& rows);

/// Builds the task described by the `task.*` keys with seed `run.seed`.
TaskData generate_task(const Config& cfg);
/// Writes train/test/validation CSVs (plus aligned context files for
/// conditional tasks), meta.json and, for GMM targets, target.json.
void save_task(const TaskData& data, const std::string& dir);
TaskData load_task(const std::string& dir);

void cmd_gen_data(const Config& cfg, const std::string& out_dir);

/// Fits `run.method` to the task in `task_dir`. The run directory receives
/// config.ini, seed.txt, init_model.json, model.json, trace.csv, timing.csv,
/// metrics.csv and (ratio-based methods) ratio.json.
std::vector<MetricRow> cmd_fit(const Config& cfg, const std::string& task_dir, const std::string& out_dir);

/// Evaluates a saved model. `metrics` empty selects the task's defaults
/// (i_projection, test_log_likelihood, line_rmse, success_rate,
/// violation_rate as applicable). Rows are appended to `out_csv` when it is
/// non-empty.
std::vector<MetricRow> cmd_eval(const std::string& model_path, const std::string& task_dir,
                                const std::vector<std::string>& metrics, std::size_t n, std::uint64_t seed,
                                const std::string& out_csv);

/// Grid over sweep.dims x sweep.seeds x sweep.methods on random GMM tasks with
/// sweep.components components; writes out_dir/sweep.csv with one row per run.
/// Returns the number of rows.
std::size_t cmd_sweep(const Config& cfg, const std::string& out_dir);

}  // namespace eim
