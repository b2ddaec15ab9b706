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

#include "core/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "core/errors.hpp"

namespace eim {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

const std::vector<ConfigKey>& config_schema() {
  static const std::vector<ConfigKey> schema = {
      {"run.method", "eim", "eim, eim-no-kl, eim-joint, eim-joint-no-kl, em, fgan, eim-cond, ml-cond"},
      {"run.seed", "0", "master seed"},
      {"run.components", "5", "mixture components of the fitted model"},

      {"task.name", "random_gmm", "random_gmm, robot_line or obstacle"},
      {"task.dim", "2", "random_gmm: dimension"},
      {"task.components", "5", "random_gmm: target components"},
      {"task.train", "10000", "training samples (unconditional tasks)"},
      {"task.test", "5000", "test samples (unconditional tasks)"},
      {"task.validation", "5000", "validation samples (unconditional tasks)"},
      {"task.contexts", "200", "obstacle: contexts per split"},
      {"task.samples_per_context", "10", "obstacle: expert samples per context"},
      {"task.line_x", "7", "robot_line: x of the target line"},
      {"task.line_y_min", "-4", "robot_line: lower end of the line"},
      {"task.line_y_max", "4", "robot_line: upper end of the line"},
      {"task.ik_init_std", "0.5", "robot_line: std of the initial IK posture"},
      {"task.ik_damping", "0.1", "robot_line: damped least squares factor"},
      {"task.ik_max_step", "0.5", "robot_line: task-space error clamp per IK step"},
      {"task.ik_steps", "200", "robot_line: IK iterations"},
      {"task.ik_tolerance", "0.01", "robot_line: accepted end-effector error"},
      {"task.obstacle_radius", "0.08", "obstacle: obstacle radius"},
      {"task.via_spread", "0.1", "obstacle: via-height std as a fraction of the gap"},
      {"task.spline_resolution", "200", "obstacle: collision check points"},

      {"eim.iterations", "200", "outer iterations"},
      {"eim.epsilon", "0.05", "component trust region (nats)"},
      {"eim.coefficient_epsilon", "0.05", "coefficient trust region (nats)"},
      {"eim.samples_per_component", "1000", "samples per component and update"},
      {"eim.surrogate_ridge", "1e-9", "relative ridge of the quadratic surrogate fit"},
      {"eim.resample_coeff", "false", "separate samples for the coefficient losses"},
      {"eim.update_coefficients", "true", "update mixture weights"},
      {"eim.update_components", "true", "update components"},
      {"eim.features", "false", "feed the task feature map to the ratio estimator"},
      {"eim.eval_every", "10", "trace metric period (iterations)"},
      {"eim.eval_samples", "1000", "samples for the trace I-projection"},
      {"eim.checkpoint_every", "0", "model checkpoint period (0 = off)"},

      {"joint.learning_rate", "0.01", "Adam step size of the joint ablations"},
      {"joint.steps_per_iteration", "10", "Adam steps per outer iteration"},
      {"joint.batch_size", "1000", "samples per gradient step"},
      {"joint.baseline_decay", "0.9", "moving-average baseline decay"},

      {"ratio.hidden", "50,50,50", "hidden layer widths"},
      {"ratio.activation", "relu", "relu or tanh"},
      {"ratio.learning_rate", "0.001", "Adam step size"},
      {"ratio.beta1", "0.9", "Adam beta1"},
      {"ratio.beta2", "0.999", "Adam beta2"},
      {"ratio.adam_epsilon", "1e-8", "Adam epsilon"},
      {"ratio.batch_size", "1000", "mini-batch size"},
      {"ratio.max_epochs", "200", "epoch budget of the first fit"},
      {"ratio.l2", "0.0001", "L2 factor on the weights"},
      {"ratio.validation_fraction", "0.2", "held-out share for early stopping"},
      {"ratio.patience", "10", "early-stopping patience (epochs)"},
      {"ratio.min_epochs", "0", "burn-in epochs of the first fit before early stopping"},
      {"ratio.epochs_per_iteration", "5", "epoch budget of each warm-started refit"},

      {"em.iterations", "100", "EM iterations"},
      {"em.covariance_floor", "1e-6", "diagonal added in every M-step"},

      {"fgan.iterations", "10000", "alternating generator/discriminator rounds"},
      {"fgan.generator_lr", "0.001", "generator Adam step size"},
      {"fgan.discriminator_lr", "0.001", "discriminator Adam step size"},
      {"fgan.generator_steps", "1", "generator steps per round"},
      {"fgan.discriminator_steps", "1", "discriminator steps per round"},
      {"fgan.batch_size", "1000", "batch size"},
      {"fgan.hidden", "50,50,50", "variational function hidden widths"},
      {"fgan.baseline_decay", "0.9", "score-function baseline decay"},
      {"fgan.eval_every", "500", "trace metric period (rounds)"},
      {"fgan.eval_samples", "1000", "samples for the trace I-projection"},

      {"cond.iterations", "100", "outer iterations"},
      {"cond.learning_rate", "0.001", "Adam step size (gating and experts)"},
      {"cond.beta1", "0.5", "Adam beta1"},
      {"cond.epochs", "10", "epochs per update and iteration"},
      {"cond.batch_size", "100", "context rows per mini-batch"},
      {"cond.samples_per_context", "10", "samples for the gating expected logits"},
      {"cond.gating_first", "true", "update the gating before the experts"},
      {"cond.weight_inside", "true", "gating weight inside the context expectation"},
      {"cond.hidden", "64,64", "gating and expert hidden widths"},
      {"cond.eval_every", "10", "trace metric period (iterations)"},

      {"ml.iterations", "100", "epochs of the maximum-likelihood baseline"},
      {"ml.learning_rate", "0.001", "Adam step size"},
      {"ml.batch_size", "100", "mini-batch size"},

      {"eval.n", "10000", "model samples per metric"},

      {"sweep.dims", "2,6,10", "random_gmm dimensions"},
      {"sweep.components", "5", "target and model components"},
      {"sweep.seeds", "0,1,2,3,4", "seeds"},
      {"sweep.methods", "eim,fgan", "methods"},
      {"sweep.jobs", "1", "concurrent runs"},
  };
  return schema;
}

std::string valid_keys_message() {
  std::string out = "valid keys:";
  for (const ConfigKey& k : config_schema()) out += std::string("\n  ") + k.key + " (default " + k.default_value + ")";
  return out;
}

Config::Config() {
  for (const ConfigKey& k : config_schema()) values_[k.key] = k.default_value;
}

Config Config::from_file(const std::string& path) {
  Config c;
  c.merge_file(path);
  return c;
}

void Config::merge_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  merge_text(ss.str(), path);
}

Config Config::from_text(const std::string& text, const std::string& origin) {
  Config c;
  c.merge_text(text, origin);
  return c;
}

void Config::merge_text(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash_pos = line.find_first_of("#;");
    if (hash_pos != std::string::npos) line = line.substr(0, hash_pos);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = origin + ":" + std::to_string(lineno);
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.find('.') == std::string::npos && !section.empty()) key = section + "." + key;
    try {
      set(key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + ": " + e.what());
    }
  }
}

void Config::set(const std::string& key, const std::string& value) {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'; " + valid_keys_message());
  it->second = value;
}

bool Config::has(const std::string& key) const { return values_.count(key) > 0; }

const std::string& Config::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'; " + valid_keys_message());
  return it->second;
}

int Config::get_int(const std::string& key) const {
  const std::string& v = get(key);
  try {
    std::size_t pos = 0;
    const long long r = std::stoll(v, &pos);
    if (pos != v.size() || r < INT32_MIN || r > INT32_MAX) throw std::invalid_argument(v);
    return static_cast<int>(r);
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected an integer, got '" + v + "'");
  }
}

std::uint64_t Config::get_u64(const std::string& key) const {
  const std::string& v = get(key);
  try {
    std::size_t pos = 0;
    if (!v.empty() && v[0] == '-') throw std::invalid_argument(v);
    const unsigned long long r = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected a non-negative integer, got '" + v + "'");
  }
}

double Config::get_double(const std::string& key) const {
  const std::string& v = get(key);
  try {
    std::size_t pos = 0;
    const double r = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected a number, got '" + v + "'");
  }
}

bool Config::get_bool(const std::string& key) const {
  const std::string& v = get(key);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("config key '" + key + "': expected a boolean, got '" + v + "'");
}

std::vector<int> Config::get_ints(const std::string& key) const {
  std::vector<int> out;
  for (const std::string& item : split(get(key), ',')) {
    try {
      std::size_t pos = 0;
      out.push_back(std::stoi(item, &pos));
      if (pos != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("config key '" + key + "': expected a list of integers, got '" + get(key) + "'");
    }
  }
  return out;
}

std::vector<std::string> Config::get_strings(const std::string& key) const { return split(get(key), ','); }

std::string Config::snapshot() const {
  std::string out, section;
  for (const ConfigKey& k : config_schema()) {
    const std::string key = k.key;
    const auto dot = key.find('.');
    const std::string sec = key.substr(0, dot);
    if (sec != section) {
      out += (section.empty() ? "[" : "\n[") + sec + "]\n";
      section = sec;
    }
    out += key.substr(dot + 1) + " = " + values_.at(key) + "\n";
  }
  return out;
}

std::string Config::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : snapshot()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace eim
