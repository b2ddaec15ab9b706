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

#include "core/runner.hpp"

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>
#include <variant>

#include "core/csv.hpp"
#include "core/eim_conditional.hpp"
#include "core/eim_gmm.hpp"
#include "core/em.hpp"
#include "core/errors.hpp"
#include "core/eval.hpp"
#include "core/fgan.hpp"
#include "core/serialization.hpp"

namespace eim {
namespace fs = std::filesystem;
namespace {

TrainConfig ratio_config(const Config& c) {
  TrainConfig t;
  t.hidden = c.get_ints("ratio.hidden");
  t.activation = activation_from_string(c.get("ratio.activation"));
  t.adam = {c.get_double("ratio.learning_rate"), c.get_double("ratio.beta1"), c.get_double("ratio.beta2"),
            c.get_double("ratio.adam_epsilon")};
  t.batch_size = c.get_int("ratio.batch_size");
  t.max_epochs = c.get_int("ratio.max_epochs");
  t.l2 = c.get_double("ratio.l2");
  t.validation_fraction = c.get_double("ratio.validation_fraction");
  t.patience = c.get_int("ratio.patience");
  t.min_epochs = c.get_int("ratio.min_epochs");
  t.validate();
  return t;
}

RobotLineConfig robot_config(const Config& c) {
  RobotLineConfig r;
  r.line_x = c.get_double("task.line_x");
  r.line_y_min = c.get_double("task.line_y_min");
  r.line_y_max = c.get_double("task.line_y_max");
  r.init_std = c.get_double("task.ik_init_std");
  r.damping = c.get_double("task.ik_damping");
  r.max_step = c.get_double("task.ik_max_step");
  r.ik_steps = c.get_int("task.ik_steps");
  r.tolerance = c.get_double("task.ik_tolerance");
  if (r.line_y_min > r.line_y_max || r.tolerance <= 0.0 || r.ik_steps <= 0) throw ConfigError("task: invalid robot settings");
  return r;
}

ObstacleConfig obstacle_config(const Config& c) {
  ObstacleConfig o;
  o.radius = c.get_double("task.obstacle_radius");
  o.spread = c.get_double("task.via_spread");
  o.resolution = c.get_int("task.spline_resolution");
  if (o.radius <= 0.0 || o.spread < 0.0 || o.resolution < 2) throw ConfigError("task: invalid obstacle settings");
  return o;
}

double constant(const std::map<std::string, double>& m, const std::string& key) {
  auto it = m.find(key);
  if (it == m.end()) throw InputError("task metadata: missing constant '" + key + "'");
  return it->second;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::optional<FeatureMap> chosen_features(const Config& c, const TaskData& data) {
  if (!c.get_bool("eim.features")) return std::nullopt;
  if (!data.spec.features) throw ConfigError("eim.features: task '" + data.spec.name + "' has no feature map");
  return data.spec.features;
}

using Model = std::variant<Gmm, MixtureOfExperts>;

std::vector<std::string> default_metrics(const TaskSpec& spec) {
  switch (spec.kind) {
    case TaskKind::kRandomGmm: return {"i_projection", "test_log_likelihood"};
    case TaskKind::kRobotLine: return {"line_rmse", "test_log_likelihood"};
    case TaskKind::kObstacle: return {"success_rate", "violation_rate", "test_log_likelihood"};
  }
  return {};
}

std::vector<MetricRow> evaluate(const Model& model, const TaskData& data, std::vector<std::string> metrics,
                                std::size_t n, std::uint64_t seed, const std::string& method,
                                const std::string& config_hash) {
  if (metrics.empty()) metrics = default_metrics(data.spec);
  std::vector<MetricRow> rows;
  auto add = [&](const std::string& metric, double value, double se, std::size_t count) {
    rows.push_back({method, data.spec.name, seed, metric, value, se, count, config_hash});
  };
  const Gmm* gmm = std::get_if<Gmm>(&model);
  const MixtureOfExperts* moe = std::get_if<MixtureOfExperts>(&model);
  if (gmm && gmm->dim() != data.spec.dim) throw InputError("eval: model dimension does not match the task");
  if (moe && (moe->dim() != data.spec.dim || moe->context_dim() != data.spec.context_dim)) {
    throw InputError("eval: model shape does not match the task");
  }
  for (const std::string& metric : metrics) {
    if (metric == "i_projection") {
      if (!gmm || !data.spec.target) throw UnsupportedError("metric i_projection needs a GMM model and an analytic target");
      const McEstimate est = mc_i_projection(*gmm, *data.spec.target, n, seed);
      add(metric, est.value, est.stderr_, est.n_used);
    } else if (metric == "test_log_likelihood") {
      if (gmm) {
        const Vector ll = gmm->log_density(data.test);
        const double mean = ll.mean();
        const double se = std::sqrt((ll.array() - mean).square().sum() / std::max<double>(1.0, ll.size() - 1.0) / ll.size());
        add(metric, mean, se, static_cast<std::size_t>(ll.size()));
      } else {
        const Vector ll = moe->log_density(data.test_contexts, data.test);
        const double mean = ll.mean();
        const double se = std::sqrt((ll.array() - mean).square().sum() / std::max<double>(1.0, ll.size() - 1.0) / ll.size());
        add(metric, mean, se, static_cast<std::size_t>(ll.size()));
      }
    } else if (metric == "line_rmse") {
      if (!gmm) throw UnsupportedError("metric line_rmse needs a GMM model");
      const TaskMetrics m = task_metrics(*gmm, data.spec, n, seed);
      add(metric, m.line_rmse, 0.0, m.n);
    } else if (metric == "success_rate" || metric == "violation_rate") {
      if (!moe) throw UnsupportedError("metric " + metric + " needs a mixture-of-experts model");
      const TaskMetrics m = task_metrics(*moe, data.spec, data.test_contexts, n, seed);
      const double p = metric == "success_rate" ? m.success_rate : m.violation_rate;
      add(metric, p, std::sqrt(p * (1.0 - p) / static_cast<double>(m.n)), m.n);
    } else {
      throw ConfigError("unknown metric '" + metric +
                        "' (valid: i_projection, test_log_likelihood, line_rmse, success_rate, violation_rate)");
    }
  }
  return rows;
}

void write_long_rows(std::ostream& os, const std::vector<std::tuple<int, std::string, int, double>>& rows) {
  os << "iteration,metric,index,value\n";
  for (const auto& [it, metric, idx, v] : rows) os << it << ',' << metric << ',' << idx << ',' << format_double(v) << '\n';
}

bool is_gmm_method(const std::string& m) {
  return m == "eim" || m == "eim-no-kl" || m == "eim-joint" || m == "eim-joint-no-kl" || m == "em" || m == "fgan";
}

}  // namespace

void write_metrics_csv(const std::string& path, const std::vector<MetricRow>& rows) {
  const bool exists = fs::exists(path) && fs::file_size(path) > 0;
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) throw IoError("cannot write '" + path + "'");
  if (!exists) out << "method,task,seed,metric,value,stderr,n,config_hash\n";
  for (const MetricRow& r : rows) {
    out << r.method << ',' << r.task << ',' << r.seed << ',' << r.metric << ',' << format_double(r.value) << ','
        << format_double(r.stderr_) << ',' << r.n << ',' << r.config_hash << '\n';
  }
}

TaskData generate_task(const Config& c) {
  const std::uint64_t seed = c.get_u64("run.seed");
  const TaskKind kind = task_kind_from_string(c.get("task.name"));
  const SplitCounts counts{c.get_int("task.train"), c.get_int("task.test"), c.get_int("task.validation")};
  if (counts.train < 1 || counts.test < 1 || counts.validation < 1) throw ConfigError("task: counts must be positive");
  switch (kind) {
    case TaskKind::kRandomGmm: {
      const int dim = c.get_int("task.dim"), k = c.get_int("task.components");
      if (dim < 1 || k < 1) throw ConfigError("task: dim and components must be positive");
      return gen_random_gmm_task(dim, k, seed, counts);
    }
    case TaskKind::kRobotLine: return gen_robot_line_task(counts, seed, robot_config(c));
    case TaskKind::kObstacle: {
      const int contexts = c.get_int("task.contexts"), spc = c.get_int("task.samples_per_context");
      if (contexts < 1 || spc < 1) throw ConfigError("task: contexts and samples per context must be positive");
      return gen_obstacle_task(contexts, spc, seed, obstacle_config(c));
    }
  }
  throw ConfigError("unknown task");
}

void save_task(const TaskData& data, const std::string& dir) {
  fs::create_directories(dir);
  const fs::path d(dir);
  write_matrix_csv((d / "train.csv").string(), data.train);
  write_matrix_csv((d / "test.csv").string(), data.test);
  write_matrix_csv((d / "validation.csv").string(), data.validation);
  if (data.spec.context_dim > 0) {
    write_matrix_csv((d / "train_contexts.csv").string(), data.train_contexts, "y");
    write_matrix_csv((d / "test_contexts.csv").string(), data.test_contexts, "y");
    write_matrix_csv((d / "validation_contexts.csv").string(), data.validation_contexts, "y");
  }
  Json meta{{"version", kFormatVersion},
            {"task", data.spec.name},
            {"seed", data.spec.seed},
            {"dim", data.spec.dim},
            {"context_dim", data.spec.context_dim},
            {"counts", {{"train", data.spec.counts.train}, {"test", data.spec.counts.test},
                        {"validation", data.spec.counts.validation}}},
            {"constants", data.spec.constants}};
  write_text_file((d / "meta.json").string(), dump(meta));
  if (data.spec.target) write_text_file((d / "target.json").string(), dump(to_json(*data.spec.target)));
}

TaskData load_task(const std::string& dir) {
  const fs::path d(dir);
  if (!fs::is_directory(d)) throw IoError("task directory '" + dir + "' does not exist");
  const Json meta = read_json_file((d / "meta.json").string());
  TaskData data;
  try {
    const std::string name = meta.at("task").get<std::string>();
    const auto seed = meta.at("seed").get<std::uint64_t>();
    const auto constants = meta.at("constants").get<std::map<std::string, double>>();
    switch (task_kind_from_string(name)) {
      case TaskKind::kRandomGmm:
        data.spec = random_gmm_spec(gmm_from_json(read_json_file((d / "target.json").string())), seed);
        break;
      case TaskKind::kRobotLine: {
        RobotLineConfig r;
        r.arm.link_lengths = Vector::Constant(static_cast<int>(constant(constants, "links")), constant(constants, "link_length"));
        r.line_x = constant(constants, "line_x");
        r.line_y_min = constant(constants, "line_y_min");
        r.line_y_max = constant(constants, "line_y_max");
        r.init_std = constant(constants, "init_std");
        r.damping = constant(constants, "damping");
        r.max_step = constant(constants, "ik_max_step");
        r.ik_steps = static_cast<int>(constant(constants, "ik_steps"));
        r.tolerance = constant(constants, "tolerance");
        data.spec = robot_line_spec(r, seed);
        break;
      }
      case TaskKind::kObstacle: {
        ObstacleConfig o;
        for (int i = 0; i < 3; ++i) o.obstacle_x[i] = constant(constants, "obstacle_x" + std::to_string(i));
        o.radius = constant(constants, "radius");
        o.height_min = constant(constants, "height_min");
        o.height_max = constant(constants, "height_max");
        o.start_y = constant(constants, "start_y");
        o.goal_y = constant(constants, "goal_y");
        o.clip_min = constant(constants, "clip_min");
        o.clip_max = constant(constants, "clip_max");
        o.spread = constant(constants, "spread");
        o.resolution = static_cast<int>(constant(constants, "resolution"));
        data.spec = obstacle_spec(o, seed);
        break;
      }
    }
    data.spec.constants = constants;
    data.spec.counts = {meta.at("counts").at("train").get<int>(), meta.at("counts").at("test").get<int>(),
                        meta.at("counts").at("validation").get<int>()};
  } catch (const Json::exception& e) {
    throw InputError("'" + (d / "meta.json").string() + "': " + e.what());
  }
  data.train = read_matrix_csv((d / "train.csv").string());
  data.test = read_matrix_csv((d / "test.csv").string());
  data.validation = read_matrix_csv((d / "validation.csv").string());
  if (data.spec.context_dim > 0) {
    data.train_contexts = read_matrix_csv((d / "train_contexts.csv").string());
    data.test_contexts = read_matrix_csv((d / "test_contexts.csv").string());
    data.validation_contexts = read_matrix_csv((d / "validation_contexts.csv").string());
    if (data.train_contexts.rows() != data.train.rows() || data.test_contexts.rows() != data.test.rows()) {
      throw InputError("task '" + dir + "': context files are not aligned with the samples");
    }
  }
  if (data.train.cols() != data.spec.dim) throw InputError("task '" + dir + "': sample width does not match metadata");
  return data;
}

void cmd_gen_data(const Config& cfg, const std::string& out_dir) {
  const TaskData data = generate_task(cfg);
  save_task(data, out_dir);
  write_text_file((fs::path(out_dir) / "config.ini").string(), cfg.snapshot());
}

std::vector<MetricRow> cmd_fit(const Config& c, const std::string& task_dir, const std::string& out_dir) {
  const std::string method = c.get("run.method");
  const std::uint64_t seed = c.get_u64("run.seed");
  const int k = c.get_int("run.components");
  if (k < 1) throw ConfigError("run.components must be positive");
  const bool conditional = method == "eim-cond" || method == "ml-cond";
  if (!conditional && !is_gmm_method(method)) {
    throw ConfigError("unknown method '" + method +
                      "' (valid: eim, eim-no-kl, eim-joint, eim-joint-no-kl, em, fgan, eim-cond, ml-cond)");
  }
  const TaskData data = load_task(task_dir);
  if (conditional != (data.spec.context_dim > 0)) {
    throw UnsupportedError("method '" + method + "' does not apply to task '" + data.spec.name + "'");
  }
  fs::create_directories(out_dir);
  const fs::path out(out_dir);
  write_text_file((out / "config.ini").string(), c.snapshot());
  write_text_file((out / "seed.txt").string(), std::to_string(seed) + "\n");
  const std::string hash = c.hash();

  std::optional<Model> model;
  std::ostringstream trace, timing;
  timing << "iteration,wall_seconds\n";

  if (!conditional) {
    const Gmm init = init_gmm_from_data(data.train, k, seed);
    write_text_file((out / "init_model.json").string(), dump(to_json(init)));
    if (method == "em") {
      EmConfig ec{c.get_int("em.iterations"), c.get_double("em.covariance_floor"), seed};
      const EmResult r = run_em_gmm(data.train, init, ec);
      std::vector<std::tuple<int, std::string, int, double>> rows;
      for (std::size_t i = 0; i < r.log_likelihood.size(); ++i) {
        rows.emplace_back(static_cast<int>(i), "train_log_likelihood", 0, r.log_likelihood[i]);
      }
      for (const EmEvent& e : r.events) rows.emplace_back(e.iteration, "reseeded_component", e.component, 1.0);
      write_long_rows(trace, rows);
      model = r.model;
    } else if (method == "fgan") {
      GanConfig gc;
      gc.iterations = c.get_int("fgan.iterations");
      gc.generator.learning_rate = c.get_double("fgan.generator_lr");
      gc.discriminator.learning_rate = c.get_double("fgan.discriminator_lr");
      gc.generator_steps = c.get_int("fgan.generator_steps");
      gc.discriminator_steps = c.get_int("fgan.discriminator_steps");
      gc.batch_size = c.get_int("fgan.batch_size");
      gc.hidden = c.get_ints("fgan.hidden");
      gc.baseline_decay = c.get_double("fgan.baseline_decay");
      gc.eval_every = c.get_int("fgan.eval_every");
      gc.eval_samples = c.get_int("fgan.eval_samples");
      gc.seed = seed;
      gc.target = data.spec.target;
      const GanResult r = run_fgan_gmm(data.train, init, gc);
      std::vector<std::tuple<int, std::string, int, double>> rows;
      for (const GanRecord& g : r.trace) {
        rows.emplace_back(g.iteration, "objective", 0, g.objective);
        if (!std::isnan(g.i_projection)) {
          rows.emplace_back(g.iteration, "i_projection", 0, g.i_projection);
          rows.emplace_back(g.iteration, "i_projection_stderr", 0, g.i_projection_stderr);
        }
      }
      if (r.diverged) rows.emplace_back(r.trace.empty() ? 0 : r.trace.back().iteration, "diverged", 0, 1.0);
      write_long_rows(trace, rows);
      model = r.model;
    } else {
      EimGmmConfig ec;
      ec.iterations = c.get_int("eim.iterations");
      ec.samples_per_component = c.get_int("eim.samples_per_component");
      ec.component_tr.epsilon = c.get_double("eim.epsilon");
      ec.coefficient_tr.epsilon = c.get_double("eim.coefficient_epsilon");
      ec.ratio = ratio_config(c);
      ec.ratio_epochs_per_iteration = c.get_int("ratio.epochs_per_iteration");
      ec.surrogate_ridge = c.get_double("eim.surrogate_ridge");
      ec.resample_coefficients = c.get_bool("eim.resample_coeff");
      ec.update_coefficients = c.get_bool("eim.update_coefficients");
      ec.update_components = c.get_bool("eim.update_components");
      ec.seed = seed;
      ec.features = chosen_features(c, data);
      ec.joint.adam.learning_rate = c.get_double("joint.learning_rate");
      ec.joint.steps_per_iteration = c.get_int("joint.steps_per_iteration");
      ec.joint.batch_size = c.get_int("joint.batch_size");
      ec.joint.baseline_decay = c.get_double("joint.baseline_decay");
      ec.target = data.spec.target;
      if (!ec.target) ec.test_data = data.test;
      ec.eval_samples = c.get_int("eim.eval_samples");
      ec.eval_every = c.get_int("eim.eval_every");
      ec.checkpoint_every = c.get_int("eim.checkpoint_every");
      if (ec.checkpoint_every > 0) {
        fs::create_directories(out / "checkpoints");
        ec.checkpoint = [out](int it, const Gmm& m) {
          write_text_file((out / "checkpoints" / ("model_" + std::to_string(it) + ".json")).string(), dump(to_json(m)));
        };
      }
      const EimVariant variant = method == "eim"         ? EimVariant::kEim
                                 : method == "eim-no-kl" ? EimVariant::kNoKl
                                 : method == "eim-joint" ? EimVariant::kJoint
                                                         : EimVariant::kJointNoKl;
      const EimResult r = run_eim_ablation(data.train, init, ec, variant);
      write_trace_csv(r.trace, trace);
      write_timing_csv(r.trace, timing);
      if (r.ratio) write_text_file((out / "ratio.json").string(), dump(to_json(*r.ratio)));
      model = r.model;
    }
  } else {
    const std::vector<int> hidden = c.get_ints("cond.hidden");
    const MixtureOfExperts init =
        init_moe_from_data(data.train_contexts, data.train, k, hidden, Activation::kRelu, seed);
    write_text_file((out / "init_model.json").string(), dump(to_json(init)));
    MoeResult r{init, {}, std::nullopt};
    if (method == "eim-cond") {
      CondEimConfig cc;
      cc.iterations = c.get_int("cond.iterations");
      cc.gating_adam = cc.component_adam = {c.get_double("cond.learning_rate"), c.get_double("cond.beta1"), 0.999, 1e-8};
      cc.epochs = c.get_int("cond.epochs");
      cc.batch_size = c.get_int("cond.batch_size");
      cc.samples_per_context = c.get_int("cond.samples_per_context");
      cc.gating_first = c.get_bool("cond.gating_first");
      cc.weight_inside = c.get_bool("cond.weight_inside");
      cc.ratio = ratio_config(c);
      cc.ratio_epochs_per_iteration = c.get_int("ratio.epochs_per_iteration");
      cc.features = chosen_features(c, data);
      cc.seed = seed;
      cc.test_contexts = data.test_contexts;
      cc.test_samples = data.test;
      cc.eval_every = c.get_int("cond.eval_every");
      r = run_eim_moe(data.train_contexts, data.train, init, cc);
      if (r.ratio) write_text_file((out / "ratio.json").string(), dump(to_json(*r.ratio)));
    } else {
      MlMoeConfig mc;
      mc.iterations = c.get_int("ml.iterations");
      mc.adam.learning_rate = c.get_double("ml.learning_rate");
      mc.batch_size = c.get_int("ml.batch_size");
      mc.seed = seed;
      mc.test_contexts = data.test_contexts;
      mc.test_samples = data.test;
      mc.eval_every = c.get_int("cond.eval_every");
      r = run_ml_moe(data.train_contexts, data.train, init, mc);
    }
    write_moe_trace_csv(r.trace, trace);
    for (const MoeIterationRecord& rec : r.trace) timing << rec.iteration << ',' << rec.wall_seconds << '\n';
    model = r.model;
  }

  std::visit([&](const auto& m) { write_text_file((out / "model.json").string(), dump(to_json(m))); }, *model);
  write_text_file((out / "trace.csv").string(), trace.str());
  write_text_file((out / "timing.csv").string(), timing.str());
  const std::vector<MetricRow> rows =
      evaluate(*model, data, {}, static_cast<std::size_t>(c.get_int("eval.n")), seed, method, hash);
  const fs::path metrics_path = out / "metrics.csv";
  fs::remove(metrics_path);
  write_metrics_csv(metrics_path.string(), rows);
  return rows;
}

std::vector<MetricRow> cmd_eval(const std::string& model_path, const std::string& task_dir,
                                const std::vector<std::string>& metrics, std::size_t n, std::uint64_t seed,
                                const std::string& out_csv) {
  if (n == 0) throw ConfigError("eval: n must be positive");
  const Json doc = read_json_file(model_path);
  const std::string type = document_type(doc);
  Model model = type == "gmm" ? Model(gmm_from_json(doc))
                : type == "moe" ? Model(moe_from_json(doc))
                                : throw InputError("'" + model_path + "': not a model document (type '" + type + "')");
  const TaskData data = load_task(task_dir);
  std::string method = "model", hash = "none";
  const fs::path run_config = fs::path(model_path).parent_path() / "config.ini";
  if (fs::exists(run_config)) {
    const Config rc = Config::from_text(read_text(run_config.string()), run_config.string());
    method = rc.get("run.method");
    hash = rc.hash();
  }
  const std::vector<MetricRow> rows = evaluate(model, data, metrics, n, seed, method, hash);
  if (!out_csv.empty()) write_metrics_csv(out_csv, rows);
  return rows;
}

std::size_t cmd_sweep(const Config& cfg, const std::string& out_dir) {
  const std::vector<int> dims = cfg.get_ints("sweep.dims");
  const std::vector<int> seeds = cfg.get_ints("sweep.seeds");
  const std::vector<std::string> methods = cfg.get_strings("sweep.methods");
  const int comps = cfg.get_int("sweep.components");
  const int jobs = std::max(1, cfg.get_int("sweep.jobs"));
  if (dims.empty() || seeds.empty() || methods.empty()) throw ConfigError("sweep: dims, seeds and methods must be non-empty");
  for (const std::string& m : methods) {
    if (!is_gmm_method(m)) throw ConfigError("sweep: method '" + m + "' is not a GMM method");
  }
  const fs::path out(out_dir);
  fs::create_directories(out);
  write_text_file((out / "config.ini").string(), cfg.snapshot());

  struct Job {
    Config cfg;
    std::string task_dir, run_dir;
    int dim, seed;
    std::string method;
  };
  std::vector<Job> grid;
  for (int d : dims) {
    for (int s : seeds) {
      Config tc = cfg;
      tc.set("task.name", "random_gmm");
      tc.set("task.dim", std::to_string(d));
      tc.set("task.components", std::to_string(comps));
      tc.set("run.components", std::to_string(comps));
      tc.set("run.seed", std::to_string(s));
      const std::string task_dir = (out / "data" / ("dim" + std::to_string(d) + "_seed" + std::to_string(s))).string();
      cmd_gen_data(tc, task_dir);
      for (const std::string& m : methods) {
        Config rc = tc;
        rc.set("run.method", m);
        grid.push_back({rc, task_dir,
                        (out / "runs" / (m + "_dim" + std::to_string(d) + "_seed" + std::to_string(s))).string(), d, s,
                        m});
      }
    }
  }

  std::vector<std::vector<MetricRow>> results(grid.size());
  std::atomic<std::size_t> next{0};
  std::mutex err_mutex;
  std::exception_ptr first_error;
  auto worker = [&]() {
    for (std::size_t i = next++; i < grid.size(); i = next++) {
      try {
        results[i] = cmd_fit(grid[i].cfg, grid[i].task_dir, grid[i].run_dir);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int j = 1; j < jobs; ++j) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);

  std::ofstream agg((out / "sweep.csv").string(), std::ios::binary);
  if (!agg) throw IoError("cannot write sweep.csv");
  agg << "method,dim,components,seed,i_projection,i_projection_stderr,test_log_likelihood,config_hash\n";
  for (std::size_t i = 0; i < grid.size(); ++i) {
    double ip = std::nan(""), se = std::nan(""), ll = std::nan("");
    for (const MetricRow& r : results[i]) {
      if (r.metric == "i_projection") {
        ip = r.value;
        se = r.stderr_;
      } else if (r.metric == "test_log_likelihood") {
        ll = r.value;
      }
    }
    agg << grid[i].method << ',' << grid[i].dim << ',' << comps << ',' << grid[i].seed << ',' << format_double(ip)
        << ',' << format_double(se) << ',' << format_double(ll) << ',' << grid[i].cfg.hash() << '\n';
  }
  return grid.size();
}

}  // namespace eim
